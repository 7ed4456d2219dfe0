"""Heights over the function field Q(t) of the projective line.

A section is a point of E(Q(t)) given by rational functions.  Its canonical
height is read two ways: from the degree growth of x([2^k]P) (the oracle),
and as the degree of the divisor D_P whose coefficient at a place is the
local height there.  Sections whose y-coordinate needs a square root may be
given x-only; local heights at the places where that square root ramifies are
computed on a local quadratic cover and divided by the ramification index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from .elliptic_core import CurvePoint, WeierstrassCurve, add_points, double_x, mul_point
from .exact_arith import (Place, RatFunc, finite_support, format_exact, ord_at, qpoly,
                          to_fraction)
from .heights_q import nonarch_multiplier

MAX_ORACLE_DEPTH = 5
RECURSION_CAP = 60


class SectionThroughTwoTorsion(ArithmeticError):
    pass


class NeedsCover(ArithmeticError):
    """Raised when a place needs a base change the fixture has not supplied."""


# sections -----------------------------------------------------------------------

@dataclass(frozen=True)
class Section:
    """A point of E over Q(var); ``y`` is None for an x-only section."""

    curve: WeierstrassCurve
    x: RatFunc | None
    y: RatFunc | None = None
    label: str = "P"
    var: str = "t"

    def __post_init__(self):
        if self.x is not None and self.y is not None:
            if not self.curve.equation_residual(self.point).is_zero():
                raise ValueError(f"section {self.label} does not satisfy the curve equation")

    @classmethod
    def zero(cls, curve: WeierstrassCurve, var: str = "t") -> "Section":
        return cls(curve, None, None, "O", var)

    @property
    def is_zero(self) -> bool:
        return self.x is None

    @property
    def has_y(self) -> bool:
        return self.y is not None or self.x is None

    @property
    def point(self) -> CurvePoint:
        return CurvePoint(self.x, self.y)

    def _need_y(self):
        if not self.has_y:
            raise ValueError(f"section {self.label} is x-only; group law needs y")

    def __add__(self, other: "Section") -> "Section":
        self._need_y()
        other._need_y()
        R = add_points(self.curve, self.point, other.point)
        return Section(self.curve, R.x, R.y, f"({self.label}+{other.label})", self.var)

    def __neg__(self) -> "Section":
        if self.is_zero:
            return self
        self._need_y()
        R = self.curve.neg(self.point)
        return Section(self.curve, R.x, R.y, f"-{self.label}", self.var)

    def __sub__(self, other: "Section") -> "Section":
        return self + (-other)

    def __rmul__(self, n: int) -> "Section":
        if self.has_y:
            R = mul_point(self.curve, n, self.point)
            return Section(self.curve, R.x, R.y, f"{n}{self.label}", self.var)
        k = abs(n)
        if k == 0 or k & (k - 1):
            self._need_y()
        # x([+-2^j]P) follows from x(P) by repeated doubling
        x = self.x
        for _ in range(k.bit_length() - 1):
            if self.curve.two_torsion_cubic(x).is_zero():
                return Section.zero(self.curve, self.var)
            x = double_x(self.curve, x)
        return Section(self.curve, x, None, f"{n}{self.label}", self.var)

    def base_change(self, g: RatFunc, var: str) -> "Section":
        """Pull back along var -> g(var)."""
        curve = self.curve.map_coefficients(lambda a: _as_rf(a).compose(g))
        x = None if self.x is None else self.x.compose(g)
        y = None if self.y is None else self.y.compose(g)
        return Section(curve, x, y, self.label, var)

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "var": self.var,
            "curve": self.curve.to_json(self.var),
            "x": None if self.x is None else format_exact(self.x, self.var),
            "y": None if self.y is None else format_exact(self.y, self.var),
        }


def _as_rf(a) -> RatFunc:
    return a if isinstance(a, RatFunc) else RatFunc.const(a)


def surface_curve(coeffs) -> WeierstrassCurve:
    """Weierstrass curve over Q(t) from five RatFunc-or-rational coefficients."""
    return WeierstrassCurve(*(_as_rf(a) for a in coeffs))


# the degree-growth oracle ----------------------------------------------------------

@dataclass
class GeometricHeight:
    value: Fraction
    exact: bool
    error: float
    depth: int
    trail: list = field(default_factory=list)


def _oracle_constant(E: WeierstrassCurve) -> float:
    """C with |deg(x(P))/2 - h(P)| <= C/2; a degree analogue of the number field constant."""
    deg = max((_as_rf(a).degree() / i for a, i in zip(E.ainvs, (1, 2, 3, 4, 6)) if a != 0),
              default=0)
    return 2.0 * (2 * deg + _as_rf(E.discriminant).degree() / 12 + 1)


def geometric_height_oracle(P: Section, depth: int = 4) -> GeometricHeight:
    """deg x([2^k]P) / (2 4^k), with exact detection when two depths agree."""
    if P.is_zero:
        return GeometricHeight(Fraction(0), True, 0.0, 0)
    if depth > MAX_ORACLE_DEPTH:
        raise ValueError(f"depth must be <= {MAX_ORACLE_DEPTH}")
    E = P.curve
    x = P.x
    trail = [Fraction(x.degree(), 2)]
    for k in range(1, depth + 1):
        if E.two_torsion_cubic(x).is_zero():
            # [2^k]P = O identically: torsion, height zero
            return GeometricHeight(Fraction(0), True, 0.0, k, trail)
        x = double_x(E, x)
        trail.append(Fraction(x.degree(), 2 * 4 ** k))
    value = trail[-1]
    exact = (len(trail) >= 2 and trail[-1] == trail[-2]
             and value.denominator <= 4 ** depth)
    err = 0.0 if exact else _oracle_constant(E) / 4 ** depth
    return GeometricHeight(value, exact, err, depth, trail)


# local heights and divisors ---------------------------------------------------------

def _local_cover(place: Place) -> RatFunc:
    """t = a + u^2 at t = a, t = 1/u^2 at infinity."""
    u = RatFunc.gen()
    if place.kind == "inf":
        return 1 / (u * u)
    if place.kind == "poly" and place.degree == 1:
        g = place.gamma
        a = -to_fraction(g[0]) / to_fraction(g[1])
        return a + u * u
    raise NeedsCover(f"place {place.label()} needs a cover supplied by the fixture")


def _ordv(place, f):
    return ord_at(place, f) if f != 0 else None


def _is_ramified(P: Section, place: Place) -> bool:
    if P.has_y:
        return False
    F = P.curve.two_torsion_cubic(P.x)
    o = _ordv(place, F)
    return o is not None and o % 2 == 1


def geometric_local_height(P: Section, place: Place, check: bool = True) -> Fraction:
    """Exact local height of a section at a place of Q(var), in units of deg(place)."""
    if P.is_zero:
        raise ValueError("local height is undefined at the zero section")
    if place.kind not in ("poly", "inf"):
        raise ValueError("function-field places are polynomials or infinity")
    if _is_ramified(P, place):
        g = _local_cover(place)
        Q = P.base_change(g, "u")
        above = Place.poly(qpoly([0, 1]))
        return geometric_local_height(Q, above, check) / 2
    try:
        r = nonarch_multiplier(P.curve, P.x, place, m_cap=RECURSION_CAP)
        if check and nonarch_multiplier(P.curve, P.x, place, m_cap=RECURSION_CAP, skip=1) != r:
            raise ArithmeticError(f"valuation recursion is unstable at {place.label()}")
    except ArithmeticError as exc:
        if "no multiple" in str(exc):
            raise ArithmeticError(f"recursion did not terminate by depth {RECURSION_CAP} at "
                                  f"{place.label()}") from exc
        raise
    return r


@dataclass
class PlaceDivisor:
    """Finite formal combination of places with rational or real coefficients."""

    terms: dict = field(default_factory=dict)

    def degree(self):
        return sum((c * pl.degree for pl, c in self.terms.items()), Fraction(0))

    def support(self) -> list[Place]:
        return sorted((pl for pl, c in self.terms.items() if c != 0), key=lambda p: p.sort_key())

    def coefficient(self, place: Place):
        return self.terms.get(place, 0)

    def __add__(self, other: "PlaceDivisor") -> "PlaceDivisor":
        out = dict(self.terms)
        for pl, c in other.terms.items():
            out[pl] = out.get(pl, 0) + c
        return PlaceDivisor({pl: c for pl, c in out.items() if c != 0})

    def scale(self, c) -> "PlaceDivisor":
        return PlaceDivisor({pl: c * v for pl, v in self.terms.items() if c * v != 0})

    def to_json(self) -> dict:
        def fmt(c):
            return format_exact(c) if isinstance(c, (Fraction, int)) else float(c)
        deg = self.degree()
        return {
            "terms": [{"place": pl.label(), "coeff": fmt(self.terms[pl])} for pl in self.support()],
            "degree": fmt(deg),
        }

    @classmethod
    def from_json(cls, data: dict) -> "PlaceDivisor":
        terms = {}
        for item in data["terms"]:
            c = item["coeff"]
            terms[Place.from_label(item["place"])] = Fraction(c) if isinstance(c, str) else c
        return cls(terms)


def candidate_places(P: Section) -> list[Place]:
    """Places where the local height can be non-zero."""
    E = P.curve
    places = set(finite_support(_as_rf(E.discriminant)))
    places.update(finite_support(P.x))
    for a in E.ainvs:
        if a != 0:
            places.update(finite_support(_as_rf(a)))
    if not P.has_y:
        F = E.two_torsion_cubic(P.x)
        if F != 0:
            places.update(finite_support(F))
    places.add(Place.infinity())
    return sorted(places, key=lambda p: p.sort_key())


def divisor_of_section(P: Section) -> PlaceDivisor:
    """D_P: the local heights of P as a Q-divisor on the base."""
    if P.is_zero:
        return PlaceDivisor()
    terms = {}
    for pl in candidate_places(P):
        c = geometric_local_height(P, pl)
        if c != 0:
            terms[pl] = c
    return PlaceDivisor(terms)


def section_height(P: Section) -> Fraction:
    """Exact canonical height as the degree of D_P."""
    if P.is_zero:
        return Fraction(0)
    return divisor_of_section(P).degree()


def pushforward(D: PlaceDivisor, cover: RatFunc, cover_degree: int | None = None,
                normalize: bool = True) -> PlaceDivisor:
    """Image of a divisor under the cover t = cover(s), divided by the degree when normalize.

    Each place of Q(s) maps to the place of Q(t) under it; coefficients scale by
    the residue degree ratio so that total degree is preserved.
    """
    d = cover_degree if cover_degree is not None else cover.degree()
    out = PlaceDivisor()
    for pl, c in D.terms.items():
        image = _image_place(pl, cover)
        weight = Fraction(pl.degree, image.degree)
        out = out + PlaceDivisor({image: c * weight})
    return out.scale(Fraction(1, d)) if normalize else out


def _image_place(pl: Place, cover: RatFunc) -> Place:
    if pl.kind == "inf":
        val = _value_at_infinity(cover)
    else:
        val = _value_at_poly_place(cover, pl)
    if val is None:
        return Place.infinity()
    return val


def _value_at_infinity(f: RatFunc):
    dn, dd = f.num.degree(), f.den.degree()
    if dn > dd:
        return None
    c = Fraction(0) if dn < dd else to_fraction(f.num[dn]) / to_fraction(f.den[dd])
    return Place.poly(qpoly([-c, 1]))


def _value_at_poly_place(f: RatFunc, pl: Place):
    """Place of Q(t) below pl: minimal polynomial of f mod gamma (None if a pole)."""
    import flint

    gamma = pl.gamma
    if f.den % gamma == 0:
        return None
    n = gamma.degree()
    # minimal polynomial of f(alpha) over Q via the resultant in a fresh variable
    num, den = f.num, f.den
    if n == 1:
        a = -to_fraction(gamma[0]) / to_fraction(gamma[1])
        c = f.evaluate(a)
        return Place.poly(qpoly([-c, 1]))
    # charpoly of multiplication by f(alpha) on Q[x]/gamma, then its irreducible factor
    basis_imgs = []
    inv = _inverse_mod(den, gamma)
    g = (num * inv) % gamma
    for i in range(n):
        v = (g * flint.fmpq_poly([0] * i + [1])) % gamma
        basis_imgs.append([v[j] for j in range(n)])
    M = flint.fmpq_mat(n, n, [basis_imgs[j][i] for i in range(n) for j in range(n)])
    cp = M.charpoly()
    fac = cp.factor()[1]
    base = fac[0][0]
    return Place.poly(base / base[base.degree()])


def _inverse_mod(a, m):
    g, s, _ = a.xgcd(m)
    return s / g[0]


# pairing, regulator, real points --------------------------------------------------------

def nt_pairing_k(P: Section, Q: Section) -> Fraction:
    """Neron-Tate pairing <P, Q> = (h(P+Q) - h(P) - h(Q)) / 2."""
    hP, hQ = section_height(P), section_height(Q)
    if P.has_y and Q.has_y and not P.is_zero and not Q.is_zero and P.x == Q.x:
        if P.y == Q.y:
            return hP
        return -hP
    return (section_height(P + Q) - hP - hQ) / 2


def gram_matrix(basis: list[Section]) -> list[list[Fraction]]:
    n = len(basis)
    G = [[Fraction(0)] * n for _ in range(n)]
    h = [section_height(P) for P in basis]
    for i in range(n):
        G[i][i] = h[i]
    for i, j in combinations(range(n), 2):
        G[i][j] = G[j][i] = (section_height(basis[i] + basis[j]) - h[i] - h[j]) / 2
    return G


@dataclass
class RealPoint:
    """X = sum x_i P_i in E(k) (x) R over an independent basis."""

    basis: list
    coeffs: list
    gram: list | None = None

    def __post_init__(self):
        if len(self.basis) != len(self.coeffs):
            raise ValueError("basis and coefficients differ in length")
        if self.gram is None:
            self.gram = gram_matrix(self.basis)
        G = np.array(self.gram, dtype=float)
        if len(self.basis) and np.linalg.det(G) <= 1e-12:
            raise ValueError("basis sections are dependent (singular Gram matrix)")

    def with_coeffs(self, coeffs) -> "RealPoint":
        return RealPoint(self.basis, list(coeffs), self.gram)

    def gram_array(self) -> np.ndarray:
        return np.array(self.gram, dtype=float)


def _bilinear(X: RealPoint, Y: RealPoint) -> float:
    G = X.gram_array()
    return float(np.asarray(X.coeffs, dtype=float) @ G @ np.asarray(Y.coeffs, dtype=float))


def realpoint_height(X: RealPoint) -> float:
    return _bilinear(X, X)


def realpoint_pairing(X: RealPoint, Y: RealPoint) -> float:
    if X.basis is not Y.basis and X.gram != Y.gram:
        raise ValueError("real points live over different bases")
    return _bilinear(X, Y)


def regulator(X: RealPoint, Y: RealPoint) -> float:
    """R(X, Y) = h(X) h(Y) - <X, Y>^2, clipped at 0 inside rounding noise."""
    hx, hy = realpoint_height(X), realpoint_height(Y)
    p = realpoint_pairing(X, Y)
    r = hx * hy - p * p
    tol = 1e-12 * max(1.0, abs(hx * hy))
    return 0.0 if abs(r) <= tol else r


def combination_divisor(X: RealPoint) -> PlaceDivisor:
    """sum (x_i^2 - x_i sum_{j != i} x_j) D_{P_i} + sum_{i<j} x_i x_j D_{P_i + P_j}."""
    xs = list(X.coeffs)
    total = sum(xs)
    D = PlaceDivisor()
    for i, P in enumerate(X.basis):
        c = xs[i] * xs[i] - xs[i] * (total - xs[i])
        D = D + divisor_of_section(P).scale(c)
    for i, j in combinations(range(len(xs)), 2):
        D = D + divisor_of_section(X.basis[i] + X.basis[j]).scale(xs[i] * xs[j])
    return D


def keyiso_degrees(P1: Section, P2: Section, a1: int, a2: int) -> tuple[Fraction, Fraction]:
    """(deg D_{a1 P1 + a2 P2}, the combination formula); equal for every (a1, a2)."""
    lhs = section_height(a1 * P1 + a2 * P2)
    h1, h2, h12 = section_height(P1), section_height(P2), section_height(P1 + P2)
    rhs = (a1 * a1 - a1 * a2) * h1 + (a2 * a2 - a1 * a2) * h2 + a1 * a2 * h12
    return lhs, rhs
