import math
from fractions import Fraction as F

import numpy as np
import pytest

from heightlab.algebraic import AlgebraicNumber
from heightlab.exact_arith import RatFunc
from heightlab.function_field import RealPoint, Section
from heightlab.heights_q import SingularFiber
from heightlab.specialization import (fiber_context, fiber_height, fiber_height_real,
                                      gram_and_det, silverman_ratio_scan, specialize)

t = RatFunc.gen()


def test_specialize_examples(P2):
    pt = specialize(P2, 3, y_hint=1j)
    assert pt.x == AlgebraicNumber.from_rational(2)
    assert (pt.y * pt.y) == AlgebraicNumber.from_rational(-2)
    assert pt.y.imag > 0
    assert specialize(P2, 2).y.is_zero()
    with pytest.raises(SingularFiber):
        specialize(P2, 0)


def test_specialize_pole_goes_to_origin(L):
    P = Section(L, 1 / (t - 3), None, "pole")
    assert specialize(P, 3).is_zero


def test_fiber_heights_torsion_parameters(P2):
    for t0 in (2, 4, F(4, 3)):
        h = fiber_height(P2, t0)
        assert abs(h.value) <= max(h.certified_error, 1e-12)


def test_fiber_height_real_single(rank2):
    X = RealPoint(rank2.base, [1.0, 0.0], gram=rank2.gram)
    r = fiber_height_real(X, F(7, 2))
    assert r.combination == pytest.approx(fiber_height(rank2.base[0], F(7, 2)).value, abs=1e-12)


def test_fiber_height_real_scaling(rank2):
    X = RealPoint(rank2.base, [1.0, 0.5], gram=rank2.gram)
    c = 2 ** 0.5
    a = fiber_height_real(X, F(7, 2))
    b = fiber_height_real(X.with_coeffs([c, 0.5 * c]), F(7, 2))
    assert b.combination == pytest.approx(2 * a.combination, abs=1e-8)


def test_fiber_height_real_torsion_parameter(rank2):
    X = RealPoint(rank2.base, [1.0, 0.0], gram=rank2.gram)
    assert abs(fiber_height_real(X, 4).combination) <= 1e-10


def test_route_equivalence(rank2):
    rng = np.random.default_rng(4)
    # fiber pairings of x-only sections: y-branches fixed by the cover coordinate
    for t0 in (F(7, 2), F(-5), F(11, 3), F(9, 2), F(-7, 3)):
        X = RealPoint(rank2.base, list(rng.normal(size=2)), gram=rank2.gram)
        r = fiber_height_real(X, t0, y_hints=[1j, 1j] if t0 > 3 else [1, 1])
        assert abs(r.combination - r.gram_form) <= 2 * r.error + 1e-9


def test_dependent_points_pairing(rank2):
    X = RealPoint(rank2.base, [1.0, 0.7], gram=rank2.gram)
    for t0 in (F(7, 2), F(-5)):
        c = 1.7
        hx = fiber_height_real(X, t0).gram_form
        h_plus = fiber_height_real(X.with_coeffs([1 + c, 0.7 * (1 + c)]), t0).gram_form
        # <X, cX> from polarization
        pair = (h_plus - hx - c * c * hx) / 2
        assert pair == pytest.approx(c * hx, abs=1e-6)


def test_gram_rank1(P2):
    g = gram_and_det([P2], F(7, 2))
    assert g.determinant == pytest.approx(fiber_height(P2, F(7, 2)).value, abs=1e-12)


def test_gram_degenerate_at_torsion(rank2):
    g = gram_and_det(rank2.base, 2)
    assert abs(g.matrix[0, 0]) <= 1e-10 and abs(g.determinant) <= 1e-8


def test_gram_unimodular_invariance(rank2):
    # the cover point m = 0 lies over t = 3/2; the lifted sections fix the y-branches
    P2s, P3s = rank2.lifted
    hints = [complex(P.y.evaluate(0)) for P in (P2s, P3s)]
    t0 = rank2.cover.evaluate(F(0))
    g = gram_and_det(rank2.base, t0, hints)
    # S1 -> S1 + S2, built on the cover and pushed down as an x-only section
    S = P2s + P3s
    hint = complex(S.y.evaluate(0))
    base_sum = Section(rank2.base[0].curve, S.x.evaluate(F(0)) + 0 * t, None, "S")
    g2 = gram_and_det([base_sum, rank2.base[1]], t0, [hint, hints[1]])
    assert g2.determinant == pytest.approx(g.determinant, abs=1e-6)


def test_gram_psd_random_fibers(rank2):
    rng = np.random.default_rng(0)
    done = 0
    while done < 12:
        t0 = F(int(rng.integers(-30, 31)), int(rng.integers(1, 8)))
        if t0 in (0, 1):
            continue
        g = gram_and_det(rank2.base, t0)
        assert np.linalg.eigvalsh(g.matrix).min() >= -1e-8
        assert np.allclose(g.matrix, g.matrix.T)
        done += 1


def test_silverman_scan(P2):
    ts = [2 ** j for j in range(3, 9)] + [8]
    rows = silverman_ratio_scan(P2, ts)
    assert len(rows) == 6
    assert [r.h_naive for r in rows] == sorted(r.h_naive for r in rows)
    gaps = [abs(r.ratio - 0.25) for r in rows]
    assert gaps[-1] < gaps[0]


def test_silverman_torsion_section(L):
    T = Section(L, t, RatFunc.const(0), "T")
    rows = silverman_ratio_scan(T, [3, 5, 7, 0])
    assert len(rows) == 3
    assert all(abs(r.ratio) < 1e-12 for r in rows)


def test_fiber_context(rank2):
    ctx = fiber_context(rank2.base, F(7, 2), [1j, 1j])
    assert ctx.smooth and len(ctx.points) == 2
    assert all(ctx.curve.equation_residual(p).is_zero() for p in ctx.points)
