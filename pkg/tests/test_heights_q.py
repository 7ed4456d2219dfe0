import cmath
import math
from fractions import Fraction as F

import numpy as np
import pytest

from heightlab.algebraic import AlgebraicNumber
from heightlab.elliptic_core import CurvePoint, WeierstrassCurve, add_points, mul_point
from heightlab.exact_arith import IntPoly
from heightlab.heights_q import (SingularFiber, canonical_height, canonical_height_fiberpoint,
                                 canonical_height_local_sum, canonical_height_oracle,
                                 local_height_arch, local_height_nonarch, specialize_curve)
from helpers import curve, gens, random_points

# 37a1 generator, in the normalization h_hat = (1/2) lim h(x(nP)) / n^2
H37 = 0.0511114 / 2


def _complex_points(E, count, seed):
    rng = np.random.default_rng(seed)
    c = [complex(a) for a in E.ainvs]
    out = []
    for _ in range(count):
        x = complex(*rng.normal(size=2))
        # y^2 + (a1 x + a3) y = cubic
        b = c[0] * x + c[2]
        rhs = x ** 3 + c[1] * x * x + c[3] * x + c[4]
        y = (-b + cmath.sqrt(b * b + 4 * rhs)) / 2
        out.append(CurvePoint(x, y))
    return WeierstrassCurve(*c), out


def _lam(E, P):
    return local_height_arch(E, P).value


@pytest.mark.parametrize("name", ["x3p1", "37a1", "102a1"])
def test_duplication_identity(name):
    E, pts = _complex_points(curve(name), 20, 1)
    D = abs(E.discriminant)
    for P in pts:
        r = (_lam(E, add_points(E, P, P)) - 4 * _lam(E, P)
             + math.log(abs(2 * P.y + E.a1 * P.x + E.a3)) - 0.25 * math.log(D))
        assert abs(r) <= 1e-10


@pytest.mark.parametrize("name", ["x3p1", "37a1"])
def test_quasi_parallelogram(name):
    E, pts = _complex_points(curve(name), 40, 2)
    D = abs(E.discriminant)
    for P, Q in zip(pts[::2], pts[1::2]):
        r = (_lam(E, add_points(E, P, Q)) + _lam(E, add_points(E, P, E.neg(Q)))
             - 2 * _lam(E, P) - 2 * _lam(E, Q) + math.log(abs(P.x - Q.x)) - math.log(D) / 6)
        assert abs(r) <= 1e-10


def test_triplication(Ex3):
    E, pts = _complex_points(Ex3, 20, 3)
    D = abs(E.discriminant)
    for P in pts:
        psi3 = 3 * P.x ** 4 + 12 * P.x
        r = _lam(E, mul_point(E, 3, P)) - 9 * _lam(E, P) + math.log(abs(psi3)) - (2 / 3) * math.log(D)
        assert abs(r) <= 1e-9


def test_arch_log_singularity_at_origin(Ex3):
    # lambda(P) - (1/2) log|x(P)| stays bounded as P -> O
    E = WeierstrassCurve(*[complex(a) for a in Ex3.ainvs])
    vals = []
    for x in (1e2, 1e4, 1e6):
        P = CurvePoint(complex(x), cmath.sqrt(x ** 3 + 1))
        vals.append(_lam(E, P) - 0.5 * math.log(x))
    # converges like O(1/x)
    assert abs(vals[2] - vals[1]) < 1e-4 and abs(vals[2] - vals[1]) < abs(vals[1] - vals[0])


def test_oracle_37a1(E37):
    h10 = canonical_height_oracle(E37, F(0), 10)
    h12 = canonical_height_oracle(E37, F(0), 12)
    assert abs(h10.value - h12.value) <= 1e-5
    assert abs(h12.value - H37) <= 1e-6
    assert h12.certified_error < h10.certified_error


def test_oracle_torsion_point(Ex3):
    h = canonical_height_oracle(Ex3, F(2), 8)
    assert h.value <= h.certified_error


def test_oracle_quadratic(E37, P37):
    d = 8
    h1 = canonical_height_oracle(E37, P37.x, d)
    h2 = canonical_height_oracle(E37, mul_point(E37, 2, P37).x, d)
    assert abs(h2.value - 4 * h1.value) <= 4 * h1.certified_error + h2.certified_error


def test_oracle_algebraic_x():
    # Legendre t = 3 fiber: x = 2 is rational; x = 1 + sqrt 2 exercises the number-field orbit
    E = WeierstrassCurve.rational([0, -4, 0, 3, 0])
    x = AlgebraicNumber.root_of(IntPoly([-1, -2, 1]), 2.4)
    a = canonical_height_oracle(E, x, 6)
    b = canonical_height_oracle(E, x, 7)
    assert abs(a.value - b.value) <= a.certified_error + b.certified_error
    assert a.value > 0


def test_nonarch_good_reduction(E37):
    lh = local_height_nonarch(E37, CurvePoint(F(1), F(0)), 5)
    assert lh.multiplier == 0 and lh.value == 0


def test_nonarch_torsion_sum_vanishes(Ex3):
    P = CurvePoint(F(2), F(3))
    lh5 = local_height_nonarch(Ex3, P, 5, check=True)
    assert isinstance(lh5.multiplier, F)
    total = canonical_height_local_sum(Ex3, P)
    assert abs(total.value) <= 1e-10


def test_local_sum_matches_oracle(E37, P37):
    ls = canonical_height_local_sum(E37, P37)
    assert abs(ls.value - canonical_height_oracle(E37, F(0), 12).value) <= 1e-4
    assert {lh.place.label() for lh in ls.per_place} == {"arch", "37"}


@pytest.mark.parametrize("n", [2, 3, 5])
def test_quadraticity_local_sum(E37, P37, n):
    h1 = canonical_height(E37, P37).value
    hn = canonical_height(E37, mul_point(E37, n, P37)).value
    assert abs(hn - n * n * h1) <= 1e-4


def test_torsion_subgroup_heights(Ex3):
    G = CurvePoint(F(2), F(3))
    for k in range(1, 6):
        Q = mul_point(Ex3, k, G)
        # orbits through two-torsion are torsion by construction
        h = canonical_height_fiberpoint(Ex3, Q.x, 8)
        assert abs(h.value) <= 1e-10


def test_model_independence(E37, P37):
    E2 = E37.transform(2, 0, 0, 0)
    Q = WeierstrassCurve.transform_point(P37, 2, 0, 0, 0)
    assert abs(local_height_arch(E37, P37).value - local_height_arch(E2, Q).value) <= 1e-10
    for p in (2, 37):
        assert local_height_nonarch(E37, P37, p).value == pytest.approx(
            local_height_nonarch(E2, Q, p).value, abs=1e-10)


def test_parallelogram_law():
    E = curve("389a1")
    pts = random_points("389a1", 8, seed=5, span=2)
    h = lambda X: canonical_height_local_sum(E, X).value  # noqa: E731
    for P, Q in zip(pts[::2], pts[1::2]):
        if P.is_zero or Q.is_zero or P == Q or P == E.neg(Q):
            continue
        lhs = h(add_points(E, P, Q)) + h(add_points(E, P, E.neg(Q)))
        assert abs(lhs - 2 * h(P) - 2 * h(Q)) <= 1e-4


def test_fiberpoint_legendre():
    def fiber(t0):
        return specialize_curve(__import__("heightlab.lab.fixtures", fromlist=["legendre"]).legendre(), t0)

    assert canonical_height_fiberpoint(fiber(F(2)), F(2)).value == pytest.approx(0, abs=1e-12)
    assert canonical_height_fiberpoint(fiber(F(4)), F(2)).value == pytest.approx(0, abs=1e-12)
    E3 = fiber(F(3))
    a = canonical_height_oracle(E3, F(2), 10).value
    b = canonical_height_oracle(E3, F(2), 12).value
    assert abs(a - b) <= 1e-5
    h = canonical_height_fiberpoint(E3, F(2))
    assert h.value > 0.1 and h.cross_check is not None
    with pytest.raises(SingularFiber):
        fiber(F(0))


def test_report_json(E37, P37):
    d = canonical_height_local_sum(E37, P37).to_json()
    assert set(d) == {"value", "error", "method", "per_place"}
