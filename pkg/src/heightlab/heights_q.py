"""Local Neron heights and canonical heights for elliptic curves over Q.

Normalization: the canonical height is half the limit of h(x(nP))/n^2, and
every local height satisfies

    lambda(2P) = 4 lambda(P) - log|2y + a1 x + a3| + (1/4) log|Delta|,

which makes the local heights independent of the Weierstrass model and makes
them sum to the canonical height.

Two routes are provided.  The *oracle* iterates the x-only doubling map
exactly and reads off the naive height; the *local sum* adds the archimedean
q-series value to exact valuation formulas at the finite places.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import flint
import gmpy2
import numpy as np

from . import lattice
from .algebraic import AlgebraicNumber, BASE_PREC, PrecisionError, _companion
from .elliptic_core import CurvePoint, DivisionValues, WeierstrassCurve
from .exact_arith import (Place, RatFunc, ord_at, prime_support, primitive_part,
                          to_fmpq, to_fraction, uniformizer, weil_height_rational)

ARCH_ERROR = 1e-11
MAX_MULTIPLE = 64


class OrbitThroughTwoTorsion(ArithmeticError):
    pass


class SingularFiber(ArithmeticError):
    pass


@dataclass
class LocalHeight:
    place: Place
    value: float
    certified_error: float = 0.0
    multiplier: Fraction | None = None  # value = multiplier * log p at a prime


@dataclass
class CanonicalHeight:
    value: float
    certified_error: float
    method: str
    per_place: list[LocalHeight] = field(default_factory=list)
    cross_check: float | None = None

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "error": self.certified_error,
            "method": self.method,
            "per_place": [{"place": lh.place.label(), "value": lh.value} for lh in self.per_place],
        }


# archimedean place ----------------------------------------------------------

def _as_complex(v) -> complex:
    if isinstance(v, Fraction):
        return float(v.numerator) / v.denominator if abs(v.numerator) < 10 ** 300 else complex(
            mp_fraction(v))
    return complex(v)


def mp_fraction(v: Fraction) -> float:
    n, d = v.numerator, v.denominator
    shift = max(n.bit_length(), d.bit_length()) - 60
    if shift > 0:
        return (n >> shift) / max(d >> shift, 1)
    return n / d


def arch_local_height_xy(b2, b4, b6, a1, a3, x, y):
    """Vectorized archimedean local height from curve invariants and a point."""
    lat = lattice.lattice_from_invariants(b2, b4, b6)
    X = np.asarray(x, dtype=complex) + np.asarray(b2, dtype=complex) / 12
    Y = 2 * np.asarray(y, dtype=complex) + np.asarray(a1, dtype=complex) * x + a3
    z = lattice.elliptic_log(X, Y, lat)
    return lattice.local_height_from_z(z, lat)


def local_height_arch(E: WeierstrassCurve, P: CurvePoint) -> LocalHeight:
    """Archimedean local height of an affine point with real or complex coordinates."""
    if P.is_zero:
        raise ValueError("local height is undefined at the origin")
    c = [_as_complex(a) for a in E.ainvs]
    Ec = WeierstrassCurve(*c)
    val = arch_local_height_xy(Ec.b2, Ec.b4, Ec.b6, c[0], c[2], _as_complex(P.x), _as_complex(P.y))
    return LocalHeight(Place.archimedean(), float(val), ARCH_ERROR * (1 + abs(float(val))))


def local_height_arch_x(E: WeierstrassCurve, x) -> LocalHeight:
    """Same, from x alone (local heights are even, so either y will do)."""
    c = [_as_complex(a) for a in E.ainvs]
    Ec = WeierstrassCurve(*c)
    xc = _as_complex(x)
    w = np.sqrt(complex(Ec.two_torsion_cubic(xc)))
    y = (w - c[0] * xc - c[2]) / 2
    return local_height_arch(Ec, CurvePoint(xc, y))


# non-archimedean places -------------------------------------------------------

def _residue_char(place: Place) -> int:
    return place.p if place.kind == "prime" else 0


def _integral_model(E: WeierstrassCurve, x, place: Place):
    """(model, x') integral at the place; short form when 6 is a unit there."""
    ordv = lambda f: ord_at(place, f) if f != 0 else 10 ** 9  # noqa: E731
    pi = uniformizer(place)
    if _residue_char(place) in (2, 3):
        k = max(0, max(-(-(-ordv(a)) // i) for a, i in zip(E.ainvs, (1, 2, 3, 4, 6))))
        u = pi ** k
        model = WeierstrassCurve(*(a * u ** i for a, i in zip(E.ainvs, (1, 2, 3, 4, 6))))
        return model, x * u ** 2, False
    A = -27 * E.c4
    B = -54 * E.c6
    X = 36 * x + 3 * E.b2
    k = max(-(ordv(A) // 4), -(ordv(B) // 6))
    u = pi ** k
    zero = A * 0
    model = WeierstrassCurve(zero, zero, zero, A * u ** 4, B * u ** 6)
    return model, X * u ** 2, True


def _singular_reduction(model: WeierstrassCurve, x, short: bool, place: Place) -> bool | None:
    """True if the point reduces to the singular point; None if undecidable x-only."""
    ordv = lambda f: ord_at(place, f) if f != 0 else 10 ** 9  # noqa: E731
    if ordv(x) < 0:
        return False
    if ordv(model.discriminant) == 0:
        return False
    if short:
        return ordv(x ** 3 + model.a4 * x + model.a6) > 0 and ordv(3 * x * x + model.a4) > 0
    p = _residue_char(place)
    if p != 2:
        return (ordv(model.two_torsion_cubic(x)) > 0
                and ordv(model.two_torsion_cubic_derivative(x)) > 0)
    if model.a1 == 0:
        return (ordv(model.two_torsion_cubic(x)) > 0
                and ordv(3 * x * x + 2 * model.a2 * x + model.a4) > 0)
    return None


def nonarch_multiplier(E: WeierstrassCurve, x, place: Place, m_cap: int = MAX_MULTIPLE,
                       skip: int = 0) -> Fraction:
    """lambda_v(P) / log(p) (or the function-field coefficient) from x(P) alone.

    Finds the least m with [m]P reducing to a non-singular point (at residue
    characteristic 2 with a1 odd: the least m with [m]P in the formal group)
    and applies

        lambda(P) = (1/2 max(0, -ord x([m]P)) - ord psi_m(P)) / m^2 + ord(Delta) / 12,

    or, when [m]P = O, lambda(P) = -ord psi_{m+1}(P) / ((m+1)^2 - 1) + ord(Delta) / 12.
    ``skip`` ignores the first admissible multiples (to recompute at a deeper one).
    """
    ordv = lambda f: ord_at(place, f)  # noqa: E731
    model, xm, short = _integral_model(E, x, place)
    od = ordv(model.discriminant)
    dv = DivisionValues(model, xm)
    F = dv.F
    ordF = ordv(F) if F != 0 else None
    found = 0
    for m in range(1, m_cap + 1):
        fm = dv(m)
        if m >= 2 and (fm == 0 or (m % 2 == 0 and F == 0)):
            fnext = dv(m + 1)
            o = ordv(fnext)
            if (m + 1) % 2 == 0:
                o += Fraction(ordF, 2)
            return Fraction(-o, (m + 1) ** 2 - 1) + Fraction(od, 12)
        x_m = dv.x_multiple(m)
        sing = _singular_reduction(model, x_m, short, place)
        if sing is None:
            sing = x_m == 0 or ordv(x_m) >= 0
        if sing:
            continue
        if found < skip:
            found += 1
            continue
        o_psi = ordv(fm)
        if m % 2 == 0:
            o_psi += Fraction(ordF, 2)
        ox = ordv(x_m) if x_m != 0 else 0
        return (Fraction(max(0, -ox), 2) - o_psi) / (m * m) + Fraction(od, 12)
    raise ArithmeticError(f"no multiple up to {m_cap} reduces to a non-singular point at {place}")


def local_height_nonarch(E: WeierstrassCurve, P, p: int, check: bool = False) -> LocalHeight:
    """Local height at a prime as an exact rational multiple of log p.

    ``P`` may be a CurvePoint or a bare rational x-coordinate.
    """
    x = P.x if isinstance(P, CurvePoint) else P
    if x is None:
        raise ValueError("local height is undefined at the origin")
    place = Place.prime(p)
    r = nonarch_multiplier(E, to_fraction(x), place)
    if check:
        r2 = nonarch_multiplier(E, to_fraction(x), place, skip=1)
        if r2 != r:
            raise ArithmeticError("valuation recursion is not stable")
    return LocalHeight(place, float(r) * math.log(p), 0.0, r)


def relevant_primes(E: WeierstrassCurve, x) -> list[int]:
    ps = set(prime_support(E.discriminant))
    ps.update(prime_support(to_fraction(x)))
    for a in E.ainvs:
        if a != 0:
            ps.update(prime_support(Fraction(to_fraction(a).denominator)))
    return sorted(ps)


def canonical_height_local_sum(E: WeierstrassCurve, P) -> CanonicalHeight:
    x = P.x if isinstance(P, CurvePoint) else P
    if x is None:
        return CanonicalHeight(0.0, 0.0, "local-sum")
    if isinstance(P, CurvePoint):
        arch = local_height_arch(E, P)
    else:
        arch = local_height_arch_x(E, x)
    parts = [arch]
    for p in relevant_primes(E, x):
        parts.append(local_height_nonarch(E, x, p))
    value = math.fsum(lh.value for lh in parts)
    err = math.fsum(lh.certified_error for lh in parts)
    return CanonicalHeight(value, err, "local-sum", parts)


# oracle -------------------------------------------------------------------------

def _log_abs_int(n) -> float:
    n = abs(int(n))
    if n == 0:
        raise ValueError("log of zero")
    b = n.bit_length()
    if b < 1000:
        return math.log(n)
    shift = b - 64
    return math.log(n >> shift) + shift * math.log(2)


def height_constant(E: WeierstrassCurve) -> float:
    """B with |h_hat(P) - h(x(P))/2| <= B for all P in E(Qbar).

    B = (1/8 + 1/12) h(j) + (1/12) h(Delta) + (1/2) h(b2/12) + (1/2) log 2 + 1.07,
    computed on an integral model, plus log(d) for the scaling x = x'/d^2 that
    makes the given model integral.
    """
    d = 1
    for a, i in zip(E.ainvs, (1, 2, 3, 4, 6)):
        den = to_fraction(a).denominator
        # smallest d with d^i * a integral, accumulated multiplicatively
        for p, e in flint.fmpz(den).factor() if den > 1 else []:
            p, e = int(p), int(e)
            while den % (p ** e) == 0 and (d ** i) % (p ** e) != 0:
                d *= p
    Ei = WeierstrassCurve(*(to_fraction(a) * d ** i for a, i in zip(E.ainvs, (1, 2, 3, 4, 6))))
    hj = weil_height_rational(Ei.j)
    hD = weil_height_rational(Ei.discriminant)
    hb = weil_height_rational(Ei.b2 / 12)
    return (1 / 8 + 1 / 12) * hj + hD / 12 + hb / 2 + math.log(2) / 2 + 1.07 + math.log(d)


def oracle_constant(E: WeierstrassCurve) -> float:
    """C = 2B: the oracle error at depth k is at most C / 4^k."""
    return 2 * height_constant(E)


def _double_x_mpq(x, b2, b4, b6, b8):
    F = ((4 * x + b2) * x + 2 * b4) * x + b6
    if F == 0:
        raise OrbitThroughTwoTorsion("orbit through two-torsion")
    x2 = x * x
    return (x2 * x2 - b4 * x2 - 2 * b6 * x - b8) / F


def _naive_height_mpq(x) -> float:
    n, d = gmpy2.numer(x), gmpy2.denom(x)
    m = max(abs(n), d)
    return _log_abs_int(m) if m > 1 else 0.0


class _NumberFieldOrbit:
    """Elements of Q(alpha) = Q[y]/(f) as rational polynomials mod f."""

    def __init__(self, alpha: AlgebraicNumber):
        self.alpha = alpha
        self.f = flint.fmpq_poly(alpha.minpoly)
        self.d = alpha.degree

    def reduce(self, g):
        return g % self.f

    def inv(self, g):
        g = g % self.f
        if g.is_zero():
            raise OrbitThroughTwoTorsion("orbit through two-torsion")
        G, s, _ = g.xgcd(self.f)
        return (s / G) % self.f

    def height(self, g) -> float:
        """Weil height of the element g(alpha)."""
        c = _companion(self.alpha.minpoly)
        n = self.d
        m = flint.fmpq_mat(n, n)
        ident = flint.fmpq_mat(n, n)
        for i in range(n):
            ident[i, i] = 1
        for coef in reversed(g.coeffs()):
            m = m * c + ident * coef
        cp = primitive_part(m.charpoly())
        lead = abs(int(cp.leading_coefficient()))
        base = _log_abs_int(lead) if lead > 1 else 0.0
        bits = max(int(cp.height_bits()), 64) + 64
        prec = max(BASE_PREC, bits)
        while prec < 1 << 24:
            total = flint.arb(0)
            with flint.ctx.workprec(prec):
                for r in [self.alpha.enclosure(prec)] + self._conjugates(prec):
                    acc = flint.acb(0)
                    for coef in reversed(g.coeffs()):
                        acc = acc * r + flint.acb(coef)
                    a = abs(acc)
                    if a > 1:
                        total += a.log()
                    elif not a < 1:
                        hi = float(a.mid()) + float(a.rad())
                        total += flint.arb(max(math.log(max(hi, 1.0)), 0) / 2,
                                           max(math.log(max(hi, 1.0)), 0) / 2)
                if float(total.rad()) < 1e-15 * max(1.0, abs(float(total.mid()))):
                    return (base + float(total.mid())) / n
            prec *= 2
        raise PrecisionError("conjugate evaluation did not converge")

    def _conjugates(self, prec):
        with flint.ctx.workprec(prec):
            roots = [r for r, _ in self.alpha.minpoly.complex_roots()]
        return [r for r in roots if not r.overlaps(self.alpha.ball)]


def canonical_height_oracle(E: WeierstrassCurve, x0, depth: int = 10) -> CanonicalHeight:
    """(1/2) 4^-depth h(x([2^depth]P)) with error bound C 4^-depth.

    ``x0`` is a rational or an AlgebraicNumber; E has rational coefficients.
    """
    if depth > 14:
        raise ValueError("depth must be <= 14")
    C = oracle_constant(E)
    b2, b4, b6, b8 = (gmpy2.mpq(to_fraction(v).numerator, to_fraction(v).denominator)
                      for v in (E.b2, E.b4, E.b6, E.b8))
    if isinstance(x0, AlgebraicNumber) and x0.is_rational():
        x0 = x0.as_fraction()
    if not isinstance(x0, AlgebraicNumber):
        q = to_fraction(x0)
        x = gmpy2.mpq(q.numerator, q.denominator)
        for _ in range(depth):
            x = _double_x_mpq(x, b2, b4, b6, b8)
        h = _naive_height_mpq(x)
    else:
        K = _NumberFieldOrbit(x0)
        g = flint.fmpq_poly([0, 1])
        B2, B4, B6, B8 = (to_fmpq(to_fraction(v)) for v in (E.b2, E.b4, E.b6, E.b8))
        for _ in range(depth):
            F = K.reduce(((4 * g + B2) * g + 2 * B4) * g + B6)
            g2 = K.reduce(g * g)
            num = K.reduce(g2 * g2 - B4 * g2 - 2 * B6 * g - B8)
            g = K.reduce(num * K.inv(F))
        h = K.height(g)
    scale = 4.0 ** (-depth)
    return CanonicalHeight(0.5 * h * scale, C * scale, "oracle-limit")


def canonical_height(E: WeierstrassCurve, P, depth: int = 8) -> CanonicalHeight:
    """Local sum when x is rational (cross-checked by the oracle), else the oracle."""
    x = P.x if isinstance(P, CurvePoint) else P
    if x is None:
        return CanonicalHeight(0.0, 0.0, "local-sum")
    if isinstance(x, AlgebraicNumber) and x.is_rational():
        x = x.as_fraction()
    if isinstance(x, AlgebraicNumber):
        return canonical_height_oracle(E, x, depth)
    return canonical_height_local_sum(E, P)


def canonical_height_fiberpoint(E: WeierstrassCurve, x0, depth: int = 7,
                                cross_check: bool = True) -> CanonicalHeight:
    """Canonical height of a point with x-coordinate x0 on a fiber over Q.

    Runs the oracle always and the local sum when x0 is rational; when both
    run they must agree within the oracle's error bound.
    """
    if E.discriminant == 0:
        raise SingularFiber("singular fiber")
    if isinstance(x0, AlgebraicNumber) and x0.is_rational():
        x0 = x0.as_fraction()
    oracle = None
    if cross_check or isinstance(x0, AlgebraicNumber):
        try:
            oracle = canonical_height_oracle(E, x0, depth)
        except OrbitThroughTwoTorsion:
            # two-torsion orbit: the point is torsion
            oracle = CanonicalHeight(0.0, 0.0, "oracle-limit")
    if isinstance(x0, AlgebraicNumber):
        return oracle
    local = canonical_height_local_sum(E, to_fraction(x0))
    if oracle is not None:
        gap = abs(local.value - oracle.value)
        if gap > oracle.certified_error + local.certified_error:
            raise ArithmeticError(f"oracle and local sum disagree by {gap:.3g}")
        local.cross_check = oracle.value
    return local


def specialize_curve(E_t: WeierstrassCurve, t0) -> WeierstrassCurve:
    """Fiber of a curve over Q(t) at a rational parameter."""
    t0 = to_fraction(t0)
    coeffs = []
    for a in E_t.ainvs:
        coeffs.append(a.evaluate(t0) if isinstance(a, RatFunc) else to_fraction(a))
    E = WeierstrassCurve(*coeffs)
    if E.discriminant == 0:
        raise SingularFiber(f"singular fiber at t = {t0}")
    return E
