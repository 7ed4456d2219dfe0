"""Weierstrass curves and their group law over Q, Q(t), algebraic numbers or C.

All formulas use the full five-coefficient form.  Field elements only need
``+ - * /`` and ``==``; the same code therefore runs on Fractions, RatFunc,
AlgebraicNumber and plain complex numbers.

Division polynomials are kept x-only: ``f_n`` equals psi_n for odd n and
psi_n / psi_2 for even n, with psi_2^2 = F(x) = 4x^3 + b2 x^2 + 2 b4 x + b6.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .algebraic import AlgebraicNumber
from .exact_arith import RatFunc, format_exact, parse_ratfunc, parse_rational, to_fraction

N_MAX_TORSION = 30


class InconclusiveTorsion(RuntimeError):
    """No order found up to the search bound and non-torsion could not be certified."""


@dataclass(frozen=True)
class WeierstrassCurve:
    """y^2 + a1 xy + a3 y = x^3 + a2 x^2 + a4 x + a6."""

    a1: object
    a2: object
    a3: object
    a4: object
    a6: object

    @classmethod
    def from_list(cls, coeffs) -> "WeierstrassCurve":
        return cls(*coeffs)

    @classmethod
    def rational(cls, coeffs) -> "WeierstrassCurve":
        return cls(*(to_fraction(c) for c in coeffs))

    @property
    def ainvs(self) -> tuple:
        return (self.a1, self.a2, self.a3, self.a4, self.a6)

    @cached_property
    def b2(self):
        return self.a1 * self.a1 + 4 * self.a2

    @cached_property
    def b4(self):
        return 2 * self.a4 + self.a1 * self.a3

    @cached_property
    def b6(self):
        return self.a3 * self.a3 + 4 * self.a6

    @cached_property
    def b8(self):
        a1, a2, a3, a4, a6 = self.ainvs
        return a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4

    @cached_property
    def c4(self):
        return self.b2 * self.b2 - 24 * self.b4

    @cached_property
    def c6(self):
        return -self.b2 ** 3 + 36 * self.b2 * self.b4 - 216 * self.b6

    @cached_property
    def discriminant(self):
        b2, b4, b6, b8 = self.b2, self.b4, self.b6, self.b8
        return -b2 * b2 * b8 - 8 * b4 ** 3 - 27 * b6 * b6 + 9 * b2 * b4 * b6

    @cached_property
    def j(self):
        return self.c4 ** 3 / self.discriminant

    def is_smooth(self) -> bool:
        return not _is_zero(self.discriminant)

    # coordinates --------------------------------------------------------------
    def contains(self, P: "CurvePoint") -> bool:
        if P.is_zero:
            return True
        return _is_zero(self.equation_residual(P))

    def equation_residual(self, P: "CurvePoint"):
        a1, a2, a3, a4, a6 = self.ainvs
        x, y = P.x, P.y
        return y * y + a1 * x * y + a3 * y - (x * x * x + a2 * x * x + a4 * x + a6)

    def two_torsion_cubic(self, x):
        """F(x) = 4x^3 + b2 x^2 + 2 b4 x + b6, which equals (2y + a1 x + a3)^2."""
        return ((4 * x + self.b2) * x + 2 * self.b4) * x + self.b6

    def two_torsion_cubic_derivative(self, x):
        return (12 * x + 2 * self.b2) * x + 2 * self.b4

    def map_coefficients(self, fn) -> "WeierstrassCurve":
        return WeierstrassCurve(*(fn(a) for a in self.ainvs))

    def transform(self, u, r, s, t) -> "WeierstrassCurve":
        """Model with x = u^2 x' + r, y = u^3 y' + s u^2 x' + t."""
        a1, a2, a3, a4, a6 = self.ainvs
        b1 = (a1 + 2 * s) / u
        b2 = (a2 - s * a1 + 3 * r - s * s) / u ** 2
        b3 = (a3 + r * a1 + 2 * t) / u ** 3
        b4 = (a4 - s * a3 + 2 * r * a2 - (t + r * s) * a1 + 3 * r * r - 2 * s * t) / u ** 4
        b6 = (a6 + r * a4 + r * r * a2 + r ** 3 - t * a3 - t * t - r * t * a1) / u ** 6
        return WeierstrassCurve(b1, b2, b3, b4, b6)

    @staticmethod
    def transform_point(P: "CurvePoint", u, r, s, t) -> "CurvePoint":
        if P.is_zero:
            return P
        x = (P.x - r) / u ** 2
        y = (P.y - s * (P.x - r) - t) / u ** 3
        return CurvePoint(x, y)

    # group law ----------------------------------------------------------------
    def neg(self, P: "CurvePoint") -> "CurvePoint":
        if P.is_zero:
            return P
        return CurvePoint(P.x, -P.y - self.a1 * P.x - self.a3)

    def add(self, P: "CurvePoint", Q: "CurvePoint") -> "CurvePoint":
        return add_points(self, P, Q)

    def mul(self, n: int, P: "CurvePoint") -> "CurvePoint":
        return mul_point(self, n, P)

    # serialization ------------------------------------------------------------
    def to_json(self, var: str = "t") -> dict:
        return {f"a{i}": _format_elem(a, var) for i, a in zip((1, 2, 3, 4, 6), self.ainvs)}

    @classmethod
    def from_json(cls, data: dict, var: str = "t") -> "WeierstrassCurve":
        vals = [data[f"a{i}"] for i in (1, 2, 3, 4, 6)]
        if any(var in str(v) for v in vals):
            return cls(*(parse_ratfunc(str(v), var) for v in vals))
        return cls(*(parse_rational(v) for v in vals))


@dataclass(frozen=True)
class CurvePoint:
    """Affine point (x, y), or the point at infinity when x is None."""

    x: object = None
    y: object = None

    @classmethod
    def zero(cls) -> "CurvePoint":
        return cls()

    @property
    def is_zero(self) -> bool:
        return self.x is None

    def to_json(self, var: str = "t"):
        if self.is_zero:
            return ["O"]
        return [_format_elem(self.x, var), _format_elem(self.y, var)]

    @classmethod
    def from_json(cls, data, var: str = "t") -> "CurvePoint":
        if data == ["O"] or data == "O":
            return cls()
        return cls(*(_parse_elem(v, var) for v in data))


O = CurvePoint()


def _is_zero(v) -> bool:
    if isinstance(v, (RatFunc, AlgebraicNumber)):
        return v.is_zero()
    return v == 0


def _format_elem(v, var):
    if isinstance(v, AlgebraicNumber):
        return v.to_json()
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    return format_exact(v, var)


def _parse_elem(v, var):
    if isinstance(v, dict):
        if "minpoly" in v:
            return AlgebraicNumber.from_json(v)
        return complex(v["re"], v["im"])
    if var in str(v):
        return parse_ratfunc(str(v), var)
    return parse_rational(v)


def add_points(E: WeierstrassCurve, P: CurvePoint, Q: CurvePoint) -> CurvePoint:
    """Chord-tangent addition on the general Weierstrass form."""
    if P.is_zero:
        return Q
    if Q.is_zero:
        return P
    a1, a2, a3, a4, a6 = E.ainvs
    x1, y1, x2, y2 = P.x, P.y, Q.x, Q.y
    if x1 == x2:
        if _is_zero(y1 + y2 + a1 * x2 + a3):
            return O
        den = 2 * y1 + a1 * x1 + a3
        lam = (3 * x1 * x1 + 2 * a2 * x1 + a4 - a1 * y1) / den
        nu = (-x1 * x1 * x1 + a4 * x1 + 2 * a6 - a3 * y1) / den
    else:
        dx = x2 - x1
        lam = (y2 - y1) / dx
        nu = (y1 * x2 - y2 * x1) / dx
    x3 = lam * lam + a1 * lam - a2 - x1 - x2
    y3 = -(lam + a1) * x3 - nu - a3
    return CurvePoint(x3, y3)


def mul_point(E: WeierstrassCurve, n: int, P: CurvePoint) -> CurvePoint:
    """[n]P by double-and-add; negative n uses -(x, y) = (x, -y - a1 x - a3)."""
    if n < 0:
        return mul_point(E, -n, E.neg(P))
    result, base = O, P
    while n:
        if n & 1:
            result = add_points(E, result, base)
        n >>= 1
        if n:
            base = add_points(E, base, base)
    return result


# division polynomials -------------------------------------------------------

class DivisionValues:
    """Memoized f_n(x) for a fixed curve and a fixed x (number or polynomial).

    f_1 = f_2 = 1, f_3 = psi_3, f_4 = psi_4 / psi_2, and
    f_2m = f_m (f_{m+2} f_{m-1}^2 - f_{m-2} f_{m+1}^2),
    f_2m+1 = F^2 f_{m+2} f_m^3 - f_{m-1} f_{m+1}^3 (m even),
    f_2m+1 = f_{m+2} f_m^3 - F^2 f_{m-1} f_{m+1}^3 (m odd).
    """

    def __init__(self, E: WeierstrassCurve, x):
        self.E = E
        self.x = x
        b2, b4, b6, b8 = E.b2, E.b4, E.b6, E.b8
        one = x * 0 + 1
        self.F = E.two_torsion_cubic(x)
        self.F2 = self.F * self.F
        f3 = (((3 * x + b2) * x + 3 * b4) * x + 3 * b6) * x + b8
        f4 = (((((2 * x + b2) * x + 5 * b4) * x + 10 * b6) * x + 10 * b8) * x
              + (b2 * b8 - b4 * b6)) * x + (b4 * b8 - b6 * b6)
        self._memo = {0: one * 0, 1: one, 2: one, 3: f3, 4: f4}

    def __call__(self, n: int):
        if n < 0:
            return -self(-n)
        memo = self._memo
        if n in memo:
            return memo[n]
        # iterative fill in increasing order avoids deep recursion
        todo = [n]
        while todo:
            k = todo[-1]
            m = k // 2
            need = [m - 2, m - 1, m, m + 1, m + 2] if k % 2 == 0 else [m - 1, m, m + 1, m + 2]
            missing = [i for i in need if i not in memo and i >= 0]
            if missing:
                todo.extend(missing)
                continue
            todo.pop()
            if k in memo:
                continue
            f = memo.get
            if k % 2 == 0:
                val = f(m) * (f(m + 2) * f(m - 1) ** 2 - f(m - 2) * f(m + 1) ** 2)
            elif m % 2 == 0:
                val = self.F2 * f(m + 2) * f(m) ** 3 - f(m - 1) * f(m + 1) ** 3
            else:
                val = f(m + 2) * f(m) ** 3 - self.F2 * f(m - 1) * f(m + 1) ** 3
            memo[k] = val
        return memo[n]

    def psi_squared(self, n: int):
        """psi_n(x)^2, which is x-only for every n."""
        v = self(n)
        return v * v * self.F if n % 2 == 0 else v * v

    def x_multiple(self, n: int):
        """x([n]P) = x - psi_{n-1} psi_{n+1} / psi_n^2."""
        n = abs(n)
        if n == 1:
            return self.x
        num = self(n - 1) * self(n + 1)
        if n % 2 == 0:
            return self.x - num / (self(n) ** 2 * self.F)
        return self.x - self.F * num / self(n) ** 2


class UPoly:
    """Dense univariate polynomial over any coefficient ring (lowest degree first)."""

    __slots__ = ("c",)

    def __init__(self, coeffs):
        c = list(coeffs)
        while c and _is_zero(c[-1]):
            c.pop()
        self.c = c

    @classmethod
    def gen(cls, one):
        return cls([one * 0, one])

    def degree(self) -> int:
        return len(self.c) - 1

    def _lift(self, other):
        if isinstance(other, UPoly):
            return other
        return UPoly([other])

    def __add__(self, other):
        o = self._lift(other)
        n = max(len(self.c), len(o.c))
        zero = (self.c or o.c or [0])[0] * 0
        return UPoly([(self.c[i] if i < len(self.c) else zero) + (o.c[i] if i < len(o.c) else zero)
                      for i in range(n)])

    __radd__ = __add__

    def __neg__(self):
        return UPoly([-a for a in self.c])

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __mul__(self, other):
        o = self._lift(other)
        if not self.c or not o.c:
            return UPoly([])
        zero = self.c[0] * 0
        out = [zero] * (len(self.c) + len(o.c) - 1)
        for i, a in enumerate(self.c):
            if _is_zero(a):
                continue
            for j, b in enumerate(o.c):
                out[i + j] = out[i + j] + a * b
        return UPoly(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = UPoly([self.c[0] * 0 + 1]) if self.c else UPoly([1])
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        o = self._lift(other)
        return len(self.c) == len(o.c) and all(_is_zero(a - b) for a, b in zip(self.c, o.c))

    def __call__(self, x):
        acc = x * 0
        for a in reversed(self.c):
            acc = acc * x + a
        return acc

    def __repr__(self):
        return f"UPoly({self.c})"


def _one_of(E: WeierstrassCurve):
    return E.a1 * 0 + 1 if not isinstance(E.a1, int) else Fraction(1)


def division_polynomial(E: WeierstrassCurve, n: int) -> UPoly:
    """f_n as a polynomial in x (for even n the psi_2 factor is removed)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = UPoly.gen(_one_of(E))
    return DivisionValues(E, x)(n)


def x_multiplication_map(E: WeierstrassCurve, n: int) -> tuple[UPoly, UPoly]:
    """(phi_n, psi_n^2) with x([n]P) = phi_n(x) / psi_n^2(x)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    x = UPoly.gen(_one_of(E))
    dv = DivisionValues(E, x)
    psi2 = dv.psi_squared(n)
    prod = dv(n - 1) * dv(n + 1)
    if n % 2 == 1:
        prod = prod * dv.F
    return x * psi2 - prod, psi2


def psi_value(E: WeierstrassCurve, P: CurvePoint, n: int):
    """psi_n(P) including the (2y + a1 x + a3) factor for even n."""
    v = DivisionValues(E, P.x)(n)
    if n % 2 == 0:
        v = v * (2 * P.y + E.a1 * P.x + E.a3)
    return v


def double_x(E: WeierstrassCurve, x):
    """x([2]P) from x(P) alone."""
    b2, b4, b6, b8 = E.b2, E.b4, E.b6, E.b8
    num = x ** 4 - b4 * x * x - 2 * b6 * x - b8
    return num / E.two_torsion_cubic(x)


def torsion_order(E: WeierstrassCurve, P: CurvePoint, n_max: int = N_MAX_TORSION):
    """Smallest n <= n_max with [n]P = O, else "non-torsion" when certified.

    Over Q and over algebraic numbers non-torsion is certified by a canonical
    height clearly above its error bound; over Q(t) by the growth of
    deg x([2^k]P).  Otherwise :class:`InconclusiveTorsion` is raised.
    """
    if P.is_zero:
        return 1
    Q = P
    for n in range(1, n_max + 1):
        if Q.is_zero:
            return n
        Q = add_points(E, Q, P)
    x = P.x
    if isinstance(x, RatFunc):
        degs = []
        xx = x
        for _ in range(4):
            xx = double_x(E, xx)
            degs.append(xx.degree())
        if all(b >= 3 * a and b > 0 for a, b in zip(degs, degs[1:])):
            return "non-torsion"
        raise InconclusiveTorsion("x([2^k]P) degrees do not grow")
    from .heights_q import canonical_height_oracle

    h = canonical_height_oracle(E, x, depth=6)
    if h.value > 2 * h.certified_error:
        return "non-torsion"
    raise InconclusiveTorsion(f"height {h.value:.3g} below its error bound {h.certified_error:.3g}")


def curve_to_json_text(E: WeierstrassCurve, var: str = "t") -> str:
    return json.dumps(E.to_json(var))
