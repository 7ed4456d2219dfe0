from fractions import Fraction as F

import numpy as np
import pytest

from heightlab.function_field import RealPoint
from heightlab.torsion_search import (AlreadyTorsion, Combination, betti_residual,
                                      check_window, fibonacci_approximants, find_torsion_params,
                                      psi_residual, recognize_rational, small_sequence)

WINDOW = (1.05, 5.0, -1.0, 1.0)


def _hits(x2, N, **kw):
    return find_torsion_params(x2.lifted, N, WINDOW, cover=x2.cover, **kw)


def test_order_two(x2):
    hits = _hits(x2, 2)
    assert [h.rational_t for h in hits] == [F(2)]
    h = hits[0]
    assert h.exact and h.betti_residual <= 1e-10 and h.psi_residual <= 1e-8


def test_order_four(x2):
    hits = _hits(x2, 4)
    ts = sorted(h.rational_t for h in hits)
    assert ts == [F(4, 3), F(2), F(4)]
    assert all(h.exact for h in hits)
    assert all(h.betti_residual <= 1e-10 for h in hits)


def test_torsion_input_refused():
    from heightlab.lab.fixtures import section_fixture
    T = section_fixture("x3p1-torsion")
    with pytest.raises(AlreadyTorsion, match="already torsion"):
        find_torsion_params(T.lifted, 4, WINDOW)


def test_window_guard(x2):
    with pytest.raises(ValueError):
        check_window((-1, 1, -1, 1), x2.lifted.curve, x2.cover)


def test_hits_reverify(x2):
    comb = Combination.of(x2.lifted)
    for h in _hits(x2, 6, exact=False):
        res, j, k = betti_residual(comb, h.w, 6)
        assert res <= 1e-10
        assert psi_residual(comb, h.w, h.order) <= 1e-8
        assert abs(h.t.imag) <= 1 and 1.05 <= h.t.real <= 5


def test_counts_monotone_and_nested(x2):
    runs = {N: _hits(x2, N, exact=False) for N in (2, 4, 6, 8, 12)}
    counts = [len(runs[N]) for N in (2, 4, 6, 8, 12)]
    assert counts == sorted(counts) and counts[-1] > counts[0]
    for N in (2, 4, 6):
        big = np.array([h.t for h in runs[2 * N]])
        for h in runs[N]:
            assert np.min(np.abs(big - h.t)) <= 1e-8 * np.hypot(3.95, 2)


def test_rows_sorted(x2):
    hits = _hits(x2, 8, exact=False)
    keys = [(h.N, h.t.real, h.t.imag) for h in hits]
    assert keys == sorted(keys)
    assert set(hits[0].to_row()) >= {"N", "j", "k", "re_t", "im_t", "betti_residual"}


def test_recognize_rational():
    assert recognize_rational(4 / 3 + 1e-14j) == F(4, 3)
    assert recognize_rational(2 ** 0.5) is None
    assert recognize_rational(1143843 / 636340 + 2e-13) is None
    assert recognize_rational(1.5 + 0.2j) is None


def test_fibonacci_approximants():
    ap = fibonacci_approximants(5)
    assert ap[0] == ((1, 1), 1)
    for (a, b), M in ap:
        assert M == a
    assert abs(ap[-1][0][1] / ap[-1][1] - (1 + 5 ** 0.5) / 2) < 0.05


def test_small_sequence_empty(rank2):
    X = RealPoint(rank2.lifted, [1.0, 0.5], gram=rank2.gram)
    assert small_sequence(X, [], WINDOW, cover=rank2.cover) == []


def test_small_sequence_integer_point(rank2):
    X = RealPoint(rank2.lifted, [1.0, 0.0], gram=rank2.gram)
    rows = small_sequence(X, [((n, 0), n) for n in (1, 2)], WINDOW, cover=rank2.cover,
                          base_sections=rank2.base)
    assert len(rows) == 2
    for r in rows:
        if r.rational_t is not None:
            assert abs(r.h_X) <= 1e-9


def test_small_sequence_direction_check(rank2):
    X = RealPoint(rank2.lifted, [1.0, 0.5], gram=rank2.gram)
    with pytest.raises(ValueError):
        small_sequence(X, [((1, 3), 1)], WINDOW, cover=rank2.cover)
