from fractions import Fraction as F

import numpy as np
import pytest

from heightlab.betti import (BettiState, anchor_state, betti_coords, betti_map, check_rect,
                             combination_density, continue_state, density_grid,
                             elliptic_log_point, jacobian_density, periods_agm, section_density,
                             singular_parameters)
from heightlab.elliptic_core import CurvePoint, mul_point
from heightlab.exact_arith import RatFunc
from heightlab.function_field import RealPoint, Section
from heightlab.heights_q import specialize_curve
from heightlab.specialization import specialize


def _frac_dist(v, n):
    """Distance of each coordinate of v to (1/n)Z."""
    v = np.asarray(v, dtype=float) * n
    return float(np.max(np.abs(v - np.round(v)))) / n


def test_square_lattice_at_minus_one(L):
    _, _, tau = periods_agm(specialize_curve(L, -1))
    assert abs(tau - 1j) <= 1e-8


def test_rectangular_lattice_at_half(L):
    _, _, tau = periods_agm(specialize_curve(L, F(1, 2)))
    assert abs(tau.real) <= 1e-10 and tau.imag > 0


def test_tau_scaling_invariance(L):
    E = specialize_curve(L, F(1, 3))
    _, _, tau = periods_agm(E)
    _, _, tau2 = periods_agm(E.transform(2, 0, 0, 0))
    assert abs(tau - tau2) <= 1e-10


def test_elliptic_log_origin(L):
    assert elliptic_log_point(specialize_curve(L, 3), CurvePoint.zero()) == 0


def test_elliptic_log_homomorphism(L):
    E = specialize_curve(L, F(7, 2))
    w1, w2, tau = periods_agm(E)
    P = specialize(Section(L, RatFunc.const(2)), F(7, 2), 1j)
    Pc = CurvePoint(complex(P.x), complex(P.y))
    Ec = type(E)(*[complex(a) for a in E.ainvs])
    z1 = elliptic_log_point(E, Pc)
    z2 = elliptic_log_point(E, mul_point(Ec, 2, Pc))
    b = betti_coords(np.asarray((z2 - 2 * z1) / w1), np.asarray(tau))
    assert _frac_dist(b, 1) <= 1e-9


def test_four_torsion_betti(L):
    E = specialize_curve(L, 4)
    P = specialize(Section(L, RatFunc.const(2)), 4, 1j)
    w1, _, tau = periods_agm(E)
    z = elliptic_log_point(E, CurvePoint(complex(P.x), complex(P.y)))
    b = betti_coords(np.asarray(z / w1), np.asarray(tau))
    assert _frac_dist(b, 4) <= 1e-8
    assert _frac_dist(b, 2) > 0.1


def _X(basis, coeffs, gram):
    return RealPoint(basis, list(coeffs), gram=gram)


def test_betti_map_zero_and_torsion(x2):
    P = x2.lifted
    X0 = _X([P], [0.0], [[F(1, 2)]])
    assert betti_map(X0, 0.4 + 0.3j)[0] == (0.0, 0.0)
    # s = 2i lies over t = 4, where x = 2 is 4-torsion
    b, _ = betti_map(_X([P], [1.0], [[F(1, 2)]]), 2j)
    assert _frac_dist(b, 4) <= 1e-8


def test_betti_doubling(x2):
    P = x2.lifted
    for s in (0.4 + 0.3j, 1.7 - 0.2j, -0.9 + 1.1j):
        b1, _ = betti_map(_X([P], [1.0], [[F(1, 2)]]), s)
        b2, _ = betti_map(_X([2 * P], [1.0], [[F(2)]]), s)
        assert _frac_dist(np.subtract(b2, 2 * np.asarray(b1)), 1) <= 1e-9


def test_betti_additivity(rank2):
    rng = np.random.default_rng(2)
    X = _X(rank2.lifted, [0.3, -1.2], rank2.gram)
    Y = _X(rank2.lifted, [2 ** 0.5, 0.7], rank2.gram)
    XY = _X(rank2.lifted, [0.3 + 2 ** 0.5, -0.5], rank2.gram)
    for m in 0.3 + 0.6 * rng.random(50) + 1j * (0.3 + 0.6 * rng.random(50)):
        st = anchor_state(rank2.lifted, m)
        bx, _ = betti_map(X, m, st)
        by, _ = betti_map(Y, m, st)
        bxy, _ = betti_map(XY, m, st)
        assert _frac_dist(np.subtract(bxy, np.add(bx, by)), 1) <= 1e-9


def test_continuation_is_continuous(x2):
    P = x2.lifted
    X = _X([P], [1.0], [[F(1, 2)]])
    st = anchor_state([P], 0.5 + 0.5j)
    prev, _ = betti_map(X, 0.5 + 0.5j, st)
    for k in range(1, 40):
        s = 0.5 + 0.5j + 0.05 * k
        b, st = betti_map(X, s, st)
        assert max(abs(b[0] - prev[0]), abs(b[1] - prev[1])) < 0.5
        prev = b


def test_state_json_roundtrip(x2):
    st = anchor_state([x2.lifted], 0.5 + 0.5j)
    st2 = BettiState.from_json(st.to_json())
    nxt = continue_state([x2.lifted], st2, 0.6 + 0.5j)
    assert np.allclose(nxt.betti, continue_state([x2.lifted], st, 0.6 + 0.5j).betti)


GRID = (0.3 + 0.7 * np.linspace(0, 1, 7)[:, None] + 1j * (0.2 + 0.9 * np.linspace(0, 1, 7)[None, :])).ravel()


def test_density_of_torsion_section():
    from heightlab.lab.fixtures import section_fixture
    T = section_fixture("legendre-torsion").lifted
    assert np.nanmax(section_density(T, GRID + 2)) <= 1e-8


def test_density_doubling(x2):
    P = x2.lifted
    r1 = section_density(P, GRID)
    r2 = section_density(2 * P, GRID)
    assert np.nanmax(np.abs(r2 / r1 - 4)) <= 4e-6


def test_lattice_change_invariance(x2):
    X = _X([x2.lifted], [1.0], [[F(1, 2)]])
    a = jacobian_density(X, GRID, 1e-3)
    b = jacobian_density(X, GRID, 1e-3, basis_change=(1, 0, 1, 1))
    assert np.nanmax(np.abs(a - b)) <= 1e-8


def test_jacobian_vs_combination(rank2):
    X = _X(rank2.lifted, [1.0, 2 ** 0.5], rank2.gram)
    g = density_grid(X, (0.2, 1.0, 0.2, 1.0), 20)
    ok = g.valid & np.isfinite(g.rho_combination)
    assert ok.sum() >= 0.95 * ok.size
    rel = np.abs(g.rho[ok] - g.rho_combination[ok]) / np.abs(g.rho_combination[ok])
    assert rel.max() <= 1e-4
    assert (g.rho >= 0).all()


def test_combination_density_single(x2):
    X = _X([x2.lifted], [1.5], [[F(1, 2)]])
    assert np.allclose(combination_density(X, GRID), 2.25 * section_density(x2.lifted, GRID))


def test_singular_parameters_and_guard(L, x2):
    sp = np.sort(singular_parameters(L).real)
    assert np.allclose(sp, [0, 1])
    with pytest.raises(ValueError):
        check_rect((-1, 1, -1, 1), L)
    check_rect((1.05, 5, -1, 1), L)
    # on the s-cover, t = 0 and t = 1 sit at s = +-2 and s = +-sqrt 2
    sps = np.sort(singular_parameters(x2.lifted.curve).real)
    assert np.allclose(sps, [-2, -2 ** 0.5, 2 ** 0.5, 2])
