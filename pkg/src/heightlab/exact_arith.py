"""Exact rationals, integer polynomials and rational functions in one variable.

Rationals are plain :class:`fractions.Fraction` values.  Integer and rational
polynomials are python-flint ``fmpz_poly`` / ``fmpq_poly`` objects; this module
adds the pieces flint does not give directly: rational functions over Q,
places of Q and Q(t) with their valuations, and a small literal parser so exact
values survive a round trip through JSON.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering

import flint
import numpy as np

Rational = Fraction
IntPoly = flint.fmpz_poly
QPoly = flint.fmpq_poly


def to_fraction(value) -> Fraction:
    """Coerce ints, Fractions, flint fmpz/fmpq and rational literals to Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, flint.fmpz):
        return Fraction(int(value))
    if isinstance(value, flint.fmpq):
        return Fraction(int(value.p), int(value.q))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot read {value!r} as an exact rational")


def to_fmpq(value) -> flint.fmpq:
    q = to_fraction(value)
    return flint.fmpq(q.numerator, q.denominator)


def qpoly(coeffs) -> QPoly:
    """Rational polynomial from coefficients, lowest degree first."""
    return QPoly([to_fmpq(c) for c in coeffs])


def qpoly_coeffs(f: QPoly) -> list[Fraction]:
    return [to_fraction(c) for c in f.coeffs()]


def primitive_part(f: IntPoly | QPoly) -> IntPoly:
    """Integer polynomial with content 1 and positive leading coefficient."""
    if isinstance(f, QPoly):
        f = f.numer()
    if f.is_zero():
        return IntPoly([])
    c = f.content()
    g = IntPoly([x // c for x in f.coeffs()])
    if g.leading_coefficient() < 0:
        g = -g
    return g


def resultant(f: IntPoly | QPoly, g: IntPoly | QPoly):
    """Res(f, g) = lc(f)^deg g * lc(g)^deg f * prod (a_i - b_j).

    With this sign convention Res(x - a, x - b) = a - b.
    """
    if f.is_zero() and g.is_zero():
        raise ValueError("undefined resultant")
    if f.is_zero() or g.is_zero():
        return 0 if isinstance(f, IntPoly) and isinstance(g, IntPoly) else Fraction(0)
    if isinstance(f, IntPoly) and isinstance(g, IntPoly):
        return int(f.resultant(g))
    return to_fraction(QPoly(f).resultant(QPoly(g)))


def factor_rational(f: IntPoly | QPoly) -> list[tuple[QPoly, int]]:
    """Factor over Q into monic irreducibles with multiplicities."""
    _, facs = QPoly(f).factor()
    out = []
    for g, e in facs:
        g = g / g.leading_coefficient()
        out.append((g, int(e)))
    out.sort(key=lambda ge: (ge[0].degree(), [to_fraction(c) for c in ge[0].coeffs()]))
    return out


def is_irreducible(f: IntPoly | QPoly) -> bool:
    if f.degree() < 1:
        return False
    facs = factor_rational(f)
    return len(facs) == 1 and facs[0][1] == 1


def weil_height_rational(x) -> float:
    """log max(|p|, q) for x = p/q in lowest terms."""
    q = to_fraction(x)
    m = max(abs(q.numerator), q.denominator)
    return math.log(m) if m > 1 else 0.0


def ord_p(x, p: int) -> int:
    """p-adic valuation of a nonzero rational."""
    q = to_fraction(x)
    if q == 0:
        raise ValueError("valuation of zero")
    n, d, v = q.numerator, q.denominator, 0
    while n % p == 0:
        n //= p
        v += 1
    while d % p == 0:
        d //= p
        v -= 1
    return v


def _poly_ord(f: QPoly, gamma: QPoly) -> int:
    if f.is_zero():
        raise ValueError("valuation of zero")
    v = 0
    while True:
        q, r = divmod(f, gamma)
        if not r.is_zero():
            return v
        f, v = q, v + 1


@total_ordering
class RatFunc:
    """Element of Q(t): numerator / monic denominator, coprime."""

    __slots__ = ("num", "den")

    def __init__(self, num, den=None, *, _normalized: bool = False):
        num = _as_qpoly(num)
        den = QPoly([1]) if den is None else _as_qpoly(den)
        if not _normalized:
            if den.is_zero():
                raise ZeroDivisionError("rational function with zero denominator")
            if num.is_zero():
                den = QPoly([1])
            else:
                g = num.gcd(den)
                if g.degree() > 0:
                    num, den = num // g, den // g
                lc = den.leading_coefficient()
                if lc != 1:
                    num, den = num / lc, den / lc
        self.num = num
        self.den = den

    @classmethod
    def gen(cls) -> "RatFunc":
        return cls(QPoly([0, 1]), _normalized=True)

    @classmethod
    def const(cls, c) -> "RatFunc":
        return cls(QPoly([to_fmpq(c)]), _normalized=True)

    # arithmetic -----------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, RatFunc):
            return other
        if isinstance(other, (int, Fraction, flint.fmpz, flint.fmpq)):
            return RatFunc.const(other)
        if isinstance(other, (QPoly, IntPoly)):
            return RatFunc(QPoly(other), _normalized=True)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if self.den == o.den:
            return RatFunc(self.num + o.num, self.den)
        return RatFunc(self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __neg__(self):
        return RatFunc(-self.num, self.den, _normalized=True)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return RatFunc(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def inverse(self) -> "RatFunc":
        if self.num.is_zero():
            raise ZeroDivisionError("inverse of zero rational function")
        return RatFunc(self.den, self.num)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self * o.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        return RatFunc(self.num ** n, self.den ** n, _normalized=True)

    def __eq__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return False
        return self.num == o.num and self.den == o.den

    def __lt__(self, other):
        # arbitrary total order, only used for deterministic sorting
        return (self.degree(), str(self)) < (other.degree(), str(other))

    def __hash__(self):
        return hash((str(self.num), str(self.den)))

    def __bool__(self):
        return not self.num.is_zero()

    # queries --------------------------------------------------------------
    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_constant(self) -> bool:
        return self.num.degree() <= 0 and self.den.degree() == 0

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("rational function is not constant")
        return to_fraction(self.num.coeffs()[0]) if not self.num.is_zero() else Fraction(0)

    def degree(self) -> int:
        """Mapping degree P^1 -> P^1, the function-field naive height."""
        if self.num.is_zero():
            return 0
        return max(self.num.degree(), self.den.degree())

    def __call__(self, value):
        return self.evaluate(value)

    def evaluate(self, value):
        """Evaluate at a Fraction (exact), a complex number, or a numpy array."""
        if isinstance(value, (int, Fraction, flint.fmpq, flint.fmpz)):
            v = to_fmpq(value)
            d = self.den(v)
            if d == 0:
                raise ZeroDivisionError("pole of rational function")
            return to_fraction(self.num(v) / d)
        with np.errstate(divide="ignore", invalid="ignore"):  # poles come back as inf/nan
            return _eval_float(self.num, value) / _eval_float(self.den, value)

    def derivative(self) -> "RatFunc":
        return RatFunc(self.num.derivative() * self.den - self.num * self.den.derivative(), self.den ** 2)

    def compose(self, g: "RatFunc") -> "RatFunc":
        """Substitute t = g(u)."""
        return _compose_poly(self.num, g) / _compose_poly(self.den, g)

    def __repr__(self):
        return f"RatFunc({self})"

    def __str__(self):
        n = _poly_str(self.num)
        if self.den.degree() == 0:
            return n
        return f"({n})/({_poly_str(self.den)})"


def _as_qpoly(p) -> QPoly:
    if isinstance(p, QPoly):
        return p
    if isinstance(p, IntPoly):
        return QPoly(p)
    if isinstance(p, (int, Fraction, flint.fmpz, flint.fmpq)):
        return QPoly([to_fmpq(p)])
    if isinstance(p, (list, tuple)):
        return qpoly(p)
    raise TypeError(f"not a polynomial: {p!r}")


def _eval_float(p: QPoly, z):
    coeffs = [float(Fraction(int(c.p), int(c.q))) for c in p.coeffs()] or [0.0]
    acc = 0.0 * z
    for c in reversed(coeffs):
        acc = acc * z + c
    return acc


def _compose_poly(p: QPoly, g: RatFunc) -> RatFunc:
    coeffs = p.coeffs()
    if not coeffs:
        return RatFunc(QPoly([]))
    n = len(coeffs) - 1
    num = QPoly([])
    npow = QPoly([1])
    dpows = [QPoly([1])]
    for _ in range(n):
        dpows.append(dpows[-1] * g.den)
    for k, c in enumerate(coeffs):
        if c != 0:
            num += c * npow * dpows[n - k]
        npow = npow * g.num
    return RatFunc(num, dpows[n])


def _poly_str(p: QPoly, var: str = "t") -> str:
    coeffs = [to_fraction(c) for c in p.coeffs()]
    if not coeffs:
        return "0"
    terms = []
    for k in range(len(coeffs) - 1, -1, -1):
        c = coeffs[k]
        if c == 0:
            continue
        mono = "" if k == 0 else (var if k == 1 else f"{var}^{k}")
        if mono and abs(c) == 1:
            body = mono
        elif mono:
            body = f"{abs(c)}*{mono}"
        else:
            body = str(abs(c))
        terms.append(("-" if c < 0 else "+", body))
    s = ("-" if terms[0][0] == "-" else "") + terms[0][1]
    for sign, body in terms[1:]:
        s += f" {sign} {body}"
    return s


# places -------------------------------------------------------------------

@dataclass(frozen=True)
class Place:
    """A place of Q or of Q(t).

    kind is one of ``"arch"``, ``"prime"`` (uses ``p``), ``"poly"`` (uses the
    monic irreducible ``gamma``) or ``"inf"`` (the place t = infinity).
    """

    kind: str
    p: int = 0
    gamma: QPoly | None = None

    def __post_init__(self):
        if self.kind == "prime" and not _is_prime(self.p):
            raise ValueError(f"{self.p} is not prime")
        if self.kind == "poly":
            g = self.gamma
            if g is None or g.degree() < 1 or g.leading_coefficient() != 1:
                raise ValueError("function-field place needs a monic polynomial of degree >= 1")
            if not is_irreducible(g):
                raise ValueError(f"{_poly_str(g)} is not irreducible over Q")

    @classmethod
    def archimedean(cls) -> "Place":
        return cls("arch")

    @classmethod
    def prime(cls, p: int) -> "Place":
        return cls("prime", p=p)

    @classmethod
    def poly(cls, gamma) -> "Place":
        g = _as_qpoly(gamma)
        return cls("poly", gamma=g / g.leading_coefficient())

    @classmethod
    def infinity(cls) -> "Place":
        return cls("inf")

    @property
    def degree(self) -> int:
        """Residue degree over Q; 1 for the place at infinity."""
        return self.gamma.degree() if self.kind == "poly" else 1

    def __hash__(self):
        return hash((self.kind, self.p, str(self.gamma)))

    def __eq__(self, other):
        return (
            isinstance(other, Place)
            and self.kind == other.kind
            and self.p == other.p
            and str(self.gamma) == str(other.gamma)
        )

    def label(self) -> str:
        if self.kind == "arch":
            return "arch"
        if self.kind == "prime":
            return str(self.p)
        if self.kind == "inf":
            return "inf"
        g = self.gamma
        if g.degree() == 1:
            return _poly_str(g)
        return "prime-poly:" + ",".join(str(to_fraction(c)) for c in g.coeffs())

    @classmethod
    def from_label(cls, label: str) -> "Place":
        label = label.strip()
        if label == "arch":
            return cls.archimedean()
        if label == "inf":
            return cls.infinity()
        if label.startswith("prime-poly:"):
            return cls.poly(qpoly(label.split(":", 1)[1].split(",")))
        if label.lstrip("-").isdigit():
            return cls.prime(int(label))
        return cls.poly(parse_ratfunc(label).num)

    def sort_key(self):
        kinds = {"arch": 0, "prime": 1, "poly": 2, "inf": 3}
        return (kinds[self.kind], self.p, self.degree, self.label())

    def __repr__(self):
        return f"Place({self.label()})"


def ord_at(place: Place, f) -> int:
    """Valuation of a nonzero rational or rational function at a place."""
    if place.kind == "prime":
        return ord_p(f, place.p)
    if not isinstance(f, RatFunc):
        f = RatFunc.const(to_fraction(f))
    if f.is_zero():
        raise ValueError("valuation of zero")
    if place.kind == "inf":
        return f.den.degree() - f.num.degree()
    if place.kind == "poly":
        return _poly_ord(f.num, place.gamma) - _poly_ord(f.den, place.gamma)
    raise ValueError("the archimedean place has no valuation")


def uniformizer(place: Place):
    if place.kind == "prime":
        return Fraction(place.p)
    if place.kind == "poly":
        return RatFunc(place.gamma, _normalized=True)
    if place.kind == "inf":
        return RatFunc(QPoly([1]), QPoly([0, 1]), _normalized=True)
    raise ValueError("the archimedean place has no uniformizer")


def finite_support(f: RatFunc) -> list[Place]:
    """Finite places where f has a zero or pole."""
    places = []
    for part in (f.num, f.den):
        if part.degree() > 0:
            for g, _ in factor_rational(part):
                places.append(Place.poly(g))
    return sorted(set(places), key=Place.sort_key)


def prime_support(x) -> list[int]:
    q = to_fraction(x)
    ps: set[int] = set()
    for n in (abs(q.numerator), q.denominator):
        if n > 1:
            ps.update(int(p) for p, _ in flint.fmpz(n).factor())
    return sorted(ps)


def _is_prime(n: int) -> bool:
    return n >= 2 and flint.fmpz(n).is_prime()


# literal grammar ------------------------------------------------------------
#
# Exact literals are python-like expressions over integers and one variable:
#   "3/4", "-7", "t^2 - 3*t + 1/2", "(t - 1)/(t^2 + 1)", "2 - s^2/2".
# Only + - * / ^ (or **), parentheses, integer constants and the variable name
# are accepted.

MAX_LITERAL_EXPONENT = 4096

_ALLOWED = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Name,
            ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd, ast.Load)


def parse_ratfunc(text: str, var: str = "t") -> RatFunc:
    value = _parse(text, var)
    return value if isinstance(value, RatFunc) else RatFunc.const(value)


def parse_rational(text) -> Fraction:
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    value = _parse(str(text), None)
    if isinstance(value, RatFunc):
        raise ValueError(f"{text!r} is not a constant")
    return value


def _parse(text: str, var):
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"malformed exact literal {text!r}") from exc
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise ValueError(f"malformed exact literal {text!r}")
    try:
        return _eval_node(tree.body, var, text)
    except ZeroDivisionError as exc:
        raise ValueError(f"division by zero in exact literal {text!r}") from exc


def _eval_node(node, var, text):
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, int):
            raise ValueError(f"malformed exact literal {text!r}")
        return Fraction(node.value)
    if isinstance(node, ast.Name):
        if var is None or node.id != var:
            raise ValueError(f"unknown symbol {node.id!r} in {text!r}")
        return RatFunc.gen()
    if isinstance(node, ast.UnaryOp):
        v = _eval_node(node.operand, var, text)
        return -v if isinstance(node.op, ast.USub) else v
    a = _eval_node(node.left, var, text)
    b = _eval_node(node.right, var, text)
    if isinstance(node.op, ast.Add):
        return a + b
    if isinstance(node.op, ast.Sub):
        return a - b
    if isinstance(node.op, ast.Mult):
        return a * b
    if isinstance(node.op, ast.Div):
        if isinstance(a, Fraction) and isinstance(b, Fraction):
            return a / b
        return RatFunc.const(a) / b if isinstance(a, Fraction) else a / b
    if isinstance(node.op, ast.Pow):
        if isinstance(b, RatFunc) or b.denominator != 1:
            raise ValueError(f"non-integer exponent in {text!r}")
        if abs(b) > MAX_LITERAL_EXPONENT:
            raise ValueError(f"exponent too large in {text!r}")
        return a ** int(b)
    raise ValueError(f"malformed exact literal {text!r}")


def format_exact(value, var: str = "t") -> str:
    if isinstance(value, RatFunc):
        n = _poly_str(value.num, var)
        if value.den.degree() == 0:
            return n
        return f"({n})/({_poly_str(value.den, var)})"
    return str(to_fraction(value))
