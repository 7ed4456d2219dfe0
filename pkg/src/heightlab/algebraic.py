"""Algebraic numbers as (primitive irreducible minimal polynomial, isolating ball).

Arithmetic builds the characteristic polynomial of a Kronecker sum or product
of companion matrices (this is the classical resultant construction), factors
it over Q and keeps the factor whose root matches the ball computation.  Balls
are flint ``acb`` values; precision is doubled until exactly one candidate root
is compatible, up to a hard cap.
"""

from __future__ import annotations

import math
from fractions import Fraction

import flint

from .exact_arith import IntPoly, QPoly, primitive_part, to_fmpq, to_fraction

BASE_PREC = 128
MAX_PREC = 8192


class PrecisionError(RuntimeError):
    """Ball refinement did not separate candidate roots within the precision cap."""


def _roots(f: IntPoly, prec: int) -> list[flint.acb]:
    with flint.ctx.workprec(prec):
        return [r for r, _ in f.complex_roots()]


def _radius(b: flint.acb) -> float:
    return float(b.real.rad()) + float(b.imag.rad())


def _companion(f: IntPoly) -> flint.fmpq_mat:
    c = [to_fraction(x) for x in QPoly(f).coeffs()]
    d = len(c) - 1
    lead = c[-1]
    m = flint.fmpq_mat(d, d)
    for i in range(1, d):
        m[i, i - 1] = 1
    for i in range(d):
        m[i, d - 1] = to_fmpq(-c[i] / lead)
    return m


def _identity(n: int) -> flint.fmpq_mat:
    m = flint.fmpq_mat(n, n)
    for i in range(n):
        m[i, i] = 1
    return m


def _kron(a: flint.fmpq_mat, b: flint.fmpq_mat) -> flint.fmpq_mat:
    ra, ca, rb, cb = a.nrows(), a.ncols(), b.nrows(), b.ncols()
    m = flint.fmpq_mat(ra * rb, ca * cb)
    for i in range(ra):
        for j in range(ca):
            aij = a[i, j]
            if aij == 0:
                continue
            for k in range(rb):
                for l in range(cb):
                    bkl = b[k, l]
                    if bkl != 0:
                        m[i * rb + k, j * cb + l] = aij * bkl
    return m


class AlgebraicNumber:
    """An algebraic number, exact, with a certified isolating enclosure."""

    __slots__ = ("minpoly", "ball")

    def __init__(self, minpoly: IntPoly, ball: flint.acb, *, _checked: bool = False):
        self.minpoly = minpoly
        self.ball = ball
        if not _checked:
            self.minpoly = primitive_part(minpoly)
            if self.minpoly.degree() < 1:
                raise ValueError("minimal polynomial must have degree >= 1")
            facs = self.minpoly.factor()[1]
            if len(facs) != 1 or facs[0][1] != 1:
                raise ValueError("minimal polynomial is not irreducible")
            self.ball = self._isolate(ball)

    # construction -----------------------------------------------------------
    @classmethod
    def from_rational(cls, q) -> "AlgebraicNumber":
        q = to_fraction(q)
        f = IntPoly([-q.numerator, q.denominator])
        return cls(f, flint.acb(to_fmpq(q)), _checked=True)

    @classmethod
    def root_of(cls, f, approx) -> "AlgebraicNumber":
        """The root of f (any rational polynomial) nearest to a complex approximation."""
        f = primitive_part(QPoly(f) if not isinstance(f, IntPoly) else f)
        target = complex(approx)
        best = None
        for g, _ in f.factor()[1]:
            g = primitive_part(g)
            for r in _roots(g, BASE_PREC):
                d = abs(complex(r.mid()) - target)
                if best is None or d < best[0]:
                    best = (d, g, r)
        if best is None:
            raise ValueError("polynomial has no roots")
        return cls(best[1], best[2], _checked=True)

    @classmethod
    def roots_of(cls, f) -> list["AlgebraicNumber"]:
        """All distinct roots of f, sorted by (real part, imaginary part)."""
        f = primitive_part(QPoly(f) if not isinstance(f, IntPoly) else f)
        out = []
        for g, _ in f.factor()[1]:
            g = primitive_part(g)
            out.extend(cls(g, r, _checked=True) for r in _roots(g, BASE_PREC))
        out.sort(key=lambda a: (round(a.real, 12), round(a.imag, 12)))
        return out

    def _isolate(self, hint: flint.acb) -> flint.acb:
        prec = BASE_PREC
        while prec <= MAX_PREC:
            hits = [r for r in _roots(self.minpoly, prec) if r.overlaps(hint)]
            if len(hits) == 1:
                return hits[0]
            if not hits:
                # hint is a bare approximation; take the nearest root
                rs = _roots(self.minpoly, prec)
                c = complex(hint.mid())
                return min(rs, key=lambda r: abs(complex(r.mid()) - c))
            prec *= 2
        raise PrecisionError("could not isolate a root of the minimal polynomial")

    # refinement ---------------------------------------------------------------
    def enclosure(self, prec: int) -> flint.acb:
        """Ball around the number computed at the given working precision."""
        if self.degree == 1:
            with flint.ctx.workprec(prec):
                return flint.acb(self.as_fraction_fmpq())
        for r in _roots(self.minpoly, prec):
            if r.overlaps(self.ball):
                return r
        raise PrecisionError("enclosure lost its root")

    def as_fraction_fmpq(self) -> flint.fmpq:
        c = self.minpoly.coeffs()
        return flint.fmpq(-c[0], c[1])

    # queries ------------------------------------------------------------------
    @property
    def degree(self) -> int:
        return self.minpoly.degree()

    def is_rational(self) -> bool:
        return self.degree == 1

    def as_fraction(self) -> Fraction:
        if not self.is_rational():
            raise ValueError("not a rational number")
        return to_fraction(self.as_fraction_fmpq())

    def is_zero(self) -> bool:
        return self.degree == 1 and self.minpoly.coeffs()[0] == 0

    @property
    def real(self) -> float:
        return float(self.ball.real.mid())

    @property
    def imag(self) -> float:
        return float(self.ball.imag.mid())

    def __complex__(self) -> complex:
        return complex(self.real, self.imag)

    def __float__(self) -> float:
        if abs(self.imag) > 1e-30:
            raise ValueError("not a real number")
        return self.real

    def _root_index(self, prec: int) -> int:
        rs = _roots(self.minpoly, prec)
        idx = [i for i, r in enumerate(rs) if r.overlaps(self.ball)]
        if len(idx) != 1:
            raise PrecisionError("ambiguous root index")
        return idx[0]

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = AlgebraicNumber.from_rational(other)
        if not isinstance(other, AlgebraicNumber):
            return NotImplemented
        if self.minpoly != other.minpoly:
            return False
        if self.degree == 1:
            return True
        prec = BASE_PREC
        return self.enclosure(prec).overlaps(other.enclosure(prec))

    def __hash__(self):
        return hash(tuple(int(c) for c in self.minpoly.coeffs()))

    def __repr__(self):
        if self.degree == 1:
            return f"AlgebraicNumber({self.as_fraction()})"
        coeffs = [int(c) for c in self.minpoly.coeffs()]
        return f"AlgebraicNumber(root of {coeffs} near {complex(self):.6g})"

    # arithmetic ---------------------------------------------------------------
    @staticmethod
    def _coerce(x) -> "AlgebraicNumber":
        if isinstance(x, AlgebraicNumber):
            return x
        if isinstance(x, (int, Fraction, flint.fmpq, flint.fmpz)):
            return AlgebraicNumber.from_rational(to_fraction(x))
        raise TypeError(f"cannot combine AlgebraicNumber with {type(x).__name__}")

    def __add__(self, other):
        return alg_combine("add", self, self._coerce(other))

    def __radd__(self, other):
        return alg_combine("add", self._coerce(other), self)

    def __sub__(self, other):
        return alg_combine("sub", self, self._coerce(other))

    def __rsub__(self, other):
        return alg_combine("sub", self._coerce(other), self)

    def __mul__(self, other):
        return alg_combine("mul", self, self._coerce(other))

    def __rmul__(self, other):
        return alg_combine("mul", self._coerce(other), self)

    def __truediv__(self, other):
        return alg_combine("div", self, self._coerce(other))

    def __rtruediv__(self, other):
        return alg_combine("div", self._coerce(other), self)

    def __neg__(self):
        c = self.minpoly.coeffs()
        f = IntPoly([x * (-1) ** i for i, x in enumerate(c)])
        return AlgebraicNumber(primitive_part(f), -self.ball, _checked=True)

    def __pow__(self, n: int):
        if n < 0:
            return AlgebraicNumber.from_rational(1) / (self ** (-n))
        out = AlgebraicNumber.from_rational(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        return out

    def sqrt(self, hint=None) -> "AlgebraicNumber":
        return alg_sqrt(self, hint)

    def height(self) -> float:
        return weil_height_algebraic(self)

    def to_json(self) -> dict:
        return {
            "minpoly": [str(int(c)) for c in self.minpoly.coeffs()],
            "re": self.real,
            "im": self.imag,
            "radius": _radius(self.ball),
        }

    @classmethod
    def from_json(cls, data: dict) -> "AlgebraicNumber":
        f = IntPoly([int(c) for c in data["minpoly"]])
        ball = flint.acb(flint.arb(data["re"], data.get("radius", 0.0)),
                         flint.arb(data["im"], data.get("radius", 0.0)))
        return cls(f, ball)


def _pick(candidates: IntPoly, evaluate, what: str) -> AlgebraicNumber:
    """Choose the irreducible factor and root matching a ball evaluation."""
    factors = [primitive_part(g) for g, _ in candidates.factor()[1]]
    prec = BASE_PREC
    while prec <= MAX_PREC:
        target = evaluate(prec)
        hits = []
        for g in factors:
            for r in _roots(g, prec):
                if r.overlaps(target):
                    hits.append((g, r))
        if len(hits) == 1:
            return AlgebraicNumber(hits[0][0], hits[0][1], _checked=True)
        prec *= 2
    raise PrecisionError(f"could not decide the value of {what}")


def alg_combine(op: str, a: AlgebraicNumber, b: AlgebraicNumber) -> AlgebraicNumber:
    """a op b for op in add, sub, mul, div."""
    if op == "div" and b.is_zero():
        raise ZeroDivisionError("division by zero algebraic number")
    if a.is_rational() and b.is_rational():
        x, y = a.as_fraction(), b.as_fraction()
        val = {"add": x + y, "sub": x - y, "mul": x * y, "div": x / y if op == "div" else None}[op]
        return AlgebraicNumber.from_rational(val)
    ca, cb = _companion(a.minpoly), _companion(b.minpoly)
    ia, ib = _identity(a.degree), _identity(b.degree)
    if op == "add":
        m = _kron(ca, ib) + _kron(ia, cb)
    elif op == "sub":
        m = _kron(ca, ib) - _kron(ia, cb)
    elif op == "mul":
        m = _kron(ca, cb)
    elif op == "div":
        m = _kron(ca, cb.inv())
    else:
        raise ValueError(f"unknown operation {op!r}")
    charpoly = primitive_part(m.charpoly())

    def evaluate(prec):
        x, y = a.enclosure(prec), b.enclosure(prec)
        with flint.ctx.workprec(prec):
            return {"add": x + y, "sub": x - y, "mul": x * y, "div": x / y}[op]

    return _pick(charpoly, evaluate, op)


def alg_eval_poly(f: QPoly, a: AlgebraicNumber) -> AlgebraicNumber:
    """f(a) for a rational polynomial f."""
    f = QPoly(f)
    if a.is_rational():
        return AlgebraicNumber.from_rational(to_fraction(f(a.as_fraction_fmpq())))
    c = _companion(a.minpoly)
    n = a.degree
    m = flint.fmpq_mat(n, n)
    for coef in reversed(f.coeffs()):
        m = m * c + _identity(n) * coef
    charpoly = primitive_part(m.charpoly())

    def evaluate(prec):
        x = a.enclosure(prec)
        with flint.ctx.workprec(prec):
            acc = flint.acb(0)
            for coef in reversed(f.coeffs()):
                acc = acc * x + flint.acb(coef)
            return acc

    return _pick(charpoly, evaluate, "polynomial value")


def alg_sqrt(a: AlgebraicNumber, hint=None) -> AlgebraicNumber:
    """Square root of a, the branch nearest the hint.

    ``hint`` is a complex approximation of the wanted root, or a pair
    (center, radius).  Without a hint the principal branch is used.
    """
    if a.is_zero():
        return a
    c = a.minpoly.coeffs()
    f = IntPoly([c[i // 2] if i % 2 == 0 else 0 for i in range(2 * len(c) - 1)])
    z = complex(a) ** 0.5
    if hint is None:
        center, radius = z, None
    elif isinstance(hint, tuple):
        center, radius = complex(hint[0]), float(hint[1])
    else:
        center, radius = complex(hint), None
    if radius is not None and abs(z - center) < radius and abs(-z - center) < radius:
        raise ValueError("ambiguous branch hint")
    if abs(abs(z - center) - abs(z + center)) < 1e-12 * max(1.0, abs(z)):
        raise ValueError("ambiguous branch hint")
    sign = 1 if abs(z - center) < abs(z + center) else -1

    def evaluate(prec):
        x = a.enclosure(prec)
        with flint.ctx.workprec(prec):
            r = x.sqrt()
            if abs(complex(r.mid()) - sign * z) > abs(complex(r.mid()) + sign * z):
                r = -r
            return r

    return _pick(f, evaluate, "square root")


def mahler_log(f: IntPoly, tol: float = 1e-13) -> tuple[float, float]:
    """log of the Mahler measure of an integer polynomial, with an error bound."""
    f = IntPoly(f)
    if f.degree() < 1:
        c = abs(int(f.coeffs()[0])) if not f.is_zero() else 1
        return (math.log(c) if c > 1 else 0.0), 0.0
    lead = abs(int(f.leading_coefficient()))
    base = math.log(lead)
    prec = max(BASE_PREC, 2 * f.height_bits() + 64)
    while prec <= 64 * MAX_PREC:
        with flint.ctx.workprec(prec):
            total = flint.arb(0)
            for r, mult in f.complex_roots():
                m = abs(r)
                if m > 1:
                    term = m.log()
                elif m < 1:
                    term = flint.arb(0)
                else:
                    upper = float(m.upper()) if hasattr(m, "upper") else float(m.mid()) + float(m.rad())
                    term = flint.arb(math.log(max(upper, 1.0)) / 2, math.log(max(upper, 1.0)) / 2)
                total += term * mult
            err = float(total.rad())
            if err <= tol:
                return base + float(total.mid()), err
        prec *= 2
    raise PrecisionError("Mahler measure did not reach the requested accuracy")


def weil_height_algebraic(a: AlgebraicNumber) -> float:
    """Absolute logarithmic Weil height via the Mahler measure of the minimal polynomial."""
    if a.is_zero():
        return 0.0
    val, _ = mahler_log(a.minpoly)
    return val / a.degree
