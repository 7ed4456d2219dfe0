"""Acceptance criteria 1-10, each timed against its runtime budget.

Every test records a one-line verdict; the summary is printed at the end of
the pytest run (see conftest.py).
"""

import math
import os
import time
from contextlib import contextmanager
from fractions import Fraction as F

import numpy as np
import pytest

from conftest import ACCEPTANCE_RESULTS
from heightlab.betti import jacobian_density, density_grid, total_mass
from heightlab.elliptic_core import CurvePoint, WeierstrassCurve, add_points, mul_point
from heightlab.exact_arith import RatFunc
from heightlab.function_field import (RealPoint, Section, divisor_of_section,
                                      geometric_height_oracle, keyiso_degrees, regulator)
from heightlab.heights_q import (canonical_height_local_sum, canonical_height_oracle,
                                 local_height_arch)
from heightlab.lab.experiments import equidist_experiment
from heightlab.lab.fixtures import legendre, section_fixture
from heightlab.specialization import fiber_height, silverman_ratio_scan
from heightlab.torsion_search import fibonacci_approximants, find_torsion_params, small_sequence
from helpers import associativity_fuzz, curve, random_points

THREADS = min(4, os.cpu_count() or 1)
WINDOW = (1.05, 5.0, -1.0, 1.0)


@contextmanager
def criterion(n, name, budget):
    """Time the block, fold the runtime budget into the verdict and record it."""
    state = {"detail": ""}
    t0 = time.perf_counter()
    ok = False
    try:
        yield state
        ok = True
    finally:
        elapsed = time.perf_counter() - t0
        in_time = elapsed <= budget
        ACCEPTANCE_RESULTS[n] = (name, ok and in_time, elapsed, budget, state["detail"])
    assert in_time, f"criterion {n} took {elapsed:.1f} s > {budget} s"


def _count_points_mod_p(coeffs, p):
    a1, a2, a3, a4, a6 = coeffs
    n = 1
    for x in range(p):
        for y in range(p):
            if (y * y + a1 * x * y + a3 * y - x ** 3 - a2 * x * x - a4 * x - a6) % p == 0:
                n += 1
    return n


def test_criterion_01_exact_algebra():
    with criterion(1, "exact algebra", 10) as st:
        failures = associativity_fuzz(triples=1000)
        E = WeierstrassCurve.rational([0, 0, 0, 0, 1])
        G = CurvePoint(F(2), F(3))
        multiples = [mul_point(E, k, G) for k in range(7)]
        assert failures == 0
        assert multiples[6].is_zero and all(not m.is_zero for m in multiples[1:6])
        assert len({(m.x, m.y) for m in multiples[:6]}) == 6
        # reduction at good primes 5 and 11 bounds the torsion subgroup by gcd(6, 12) = 6
        bound = math.gcd(_count_points_mod_p([0, 0, 0, 0, 1], 5),
                         _count_points_mod_p([0, 0, 0, 0, 1], 11))
        assert bound == 6
        st["detail"] = "1000 triples, 0 failures; torsion Z/6 = <(2,3)>"


def _complex_points(E, count, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        x = complex(*rng.normal(size=2))
        b = E.a1 * x + E.a3
        rhs = x ** 3 + E.a2 * x * x + E.a4 * x + E.a6
        out.append(CurvePoint(x, (-b + (b * b + 4 * rhs) ** 0.5) / 2))
    return out


def test_criterion_02_local_height_identities():
    with criterion(2, "archimedean local-height identities", 10) as st:
        E = WeierstrassCurve(0j, 0j, 1 + 0j, -1 + 0j, 0j)  # 37a1 over C
        lam = lambda P: local_height_arch(E, P).value  # noqa: E731
        D = abs(E.discriminant)
        pts = _complex_points(E, 20, 11)
        others = _complex_points(E, 20, 12)
        worst = [0.0, 0.0, 0.0]
        for P, Q in zip(pts, others):
            r = lam(add_points(E, P, P)) - 4 * lam(P) + math.log(abs(2 * P.y + E.a3)) - 0.25 * math.log(D)
            worst[0] = max(worst[0], abs(r))
            r = (lam(add_points(E, P, Q)) + lam(add_points(E, P, E.neg(Q))) - 2 * lam(P) - 2 * lam(Q)
                 + math.log(abs(P.x - Q.x)) - math.log(D) / 6)
            worst[1] = max(worst[1], abs(r))
            psi3 = (((3 * P.x + E.b2) * P.x + 3 * E.b4) * P.x + 3 * E.b6) * P.x + E.b8
            r = lam(mul_point(E, 3, P)) - 9 * lam(P) + math.log(abs(psi3)) - (2 / 3) * math.log(D)
            worst[2] = max(worst[2], abs(r))
        st["detail"] = "max residuals dup/qpar/trip = " + ", ".join(f"{w:.1e}" for w in worst)
        assert max(worst) <= 1e-9


def test_criterion_03_oracle_vs_local_sum():
    with criterion(3, "canonical height: oracle vs local sum", 60) as st:
        worst = 0.0
        count = 0
        for k, name in enumerate(("37a1", "389a1", "x3m2", "x3p17", "102a1")):
            E = curve(name)
            pts = [P for P in random_points(name, 12, seed=20 + k, span=2) if not P.is_zero]
            for P in pts[:4]:
                o = canonical_height_oracle(E, P.x, 10)
                ls = canonical_height_local_sum(E, P)
                assert o.certified_error <= 1e-4
                worst = max(worst, abs(o.value - ls.value))
                count += 1
        assert count == 20
        E = curve("37a1")
        G = CurvePoint(F(0), F(0))
        h1 = canonical_height_local_sum(E, G).value
        quad = max(abs(canonical_height_local_sum(E, mul_point(E, n, G)).value - n * n * h1)
                   for n in (2, 3, 5))
        h10 = canonical_height_oracle(E, F(0), 10).value
        h12 = canonical_height_oracle(E, F(0), 12).value
        # h_hat = (1/2) lim h(x(nP))/n^2; the tabulated 0.0511114 is twice this
        st["detail"] = (f"max |oracle - local| = {worst:.1e} on {count} points; quadraticity {quad:.1e}; "
                        f"h_hat(37a1) = {h12:.7f} (x2 = {2 * h12:.7f}), depth 10/12 gap {abs(h10 - h12):.1e}")
        assert worst <= 1e-4
        assert quad <= 1e-4
        assert abs(h10 - h12) <= 1e-5
        assert abs(2 * h12 - 0.0511114) <= 1e-6


def test_criterion_04_function_field():
    with criterion(4, "function-field heights and divisors", 120) as st:
        P = Section(legendre(), RatFunc.const(2), None, "P2")
        d = 4
        h = geometric_height_oracle(P, d).value
        h2 = geometric_height_oracle(2 * P, d).value
        assert h2 == 4 * h
        D = divisor_of_section(P)
        assert D.degree() == h == F(1, 4)
        b = section_fixture("legendre-rank2")
        P2, P3 = b.lifted
        bad = [(a1, a2) for a1 in range(-3, 4) for a2 in range(-3, 4)
               if (a1, a2) != (0, 0) and len(set(keyiso_degrees(P2, P3, a1, a2))) != 1]
        assert not bad
        st["detail"] = f"h_hat(P2) = {h}, h_hat(2P2) = {h2}, deg D = {D.degree()}, 48/48 key identities exact"


def test_criterion_05_hand_derived_torsion():
    with criterion(5, "hand-derived torsion parameters", 60) as st:
        x2 = section_fixture("legendre-x2")
        found = {}
        worst = 0.0
        for N in (2, 4):
            hits = find_torsion_params(x2.lifted, N, WINDOW, cover=x2.cover)
            found[N] = {h.rational_t for h in hits if h.exact}
            worst = max([worst] + [max(h.betti_residual, h.psi_residual) for h in hits])
        assert F(2) in found[2]
        assert {F(4), F(4, 3)} <= found[4]
        assert worst <= 1e-10
        P = x2.base
        hs = {t0: fiber_height(P, t0) for t0 in (F(2), F(4), F(4, 3))}
        for h in hs.values():
            assert abs(h.value) <= max(h.certified_error, 1e-12)
        st["detail"] = (f"N=2 -> {sorted(map(str, found[2]))}, N=4 -> {sorted(map(str, found[4]))}, "
                        f"max residual {worst:.1e}")


def test_criterion_06_silverman_ratio():
    with criterion(6, "Silverman specialization ratio", 120) as st:
        P = section_fixture("legendre-x2").base
        rows = silverman_ratio_scan(P, [2 ** j for j in range(3, 13)])
        target = 0.25
        gaps = {int(round(math.log2(r.t))): abs(r.ratio - target) for r in rows}
        st["detail"] = f"gap at j=3: {gaps[3]:.4f}, at j=12: {gaps[12]:.4f}"
        assert gaps[12] <= 0.05 and gaps[12] < gaps[3]


def test_criterion_07_betti_measure():
    with criterion(7, "Betti measure: mass, lattice invariance, two density routes", 300) as st:
        x2 = section_fixture("legendre-x2")
        # on the s-cover the section has height 2 * 1/4 = 1/2
        mass = total_mass(x2.lifted).total
        rel_mass = abs(mass - 0.5) / 0.5
        X = RealPoint([x2.lifted], [1.0], gram=[[F(1, 2)]])
        g = (0.3 + 1.2 * np.linspace(0, 1, 10)[:, None] + 1j * (0.1 + 1.0 * np.linspace(0, 1, 10)[None, :])).ravel()
        a = jacobian_density(X, g, 1e-3)
        b = jacobian_density(X, g, 1e-3, basis_change=(1, 0, 1, 1))
        lat = float(np.nanmax(np.abs(a - b)))
        b2 = section_fixture("legendre-rank2")
        Y = RealPoint(b2.lifted, [1.0, 2 ** 0.5], gram=b2.gram)
        grid = density_grid(Y, (0.2, 1.0, 0.2, 1.0), 20)
        ok = grid.valid & np.isfinite(grid.rho_combination)
        routes = float(np.max(np.abs(grid.rho[ok] - grid.rho_combination[ok]) / np.abs(grid.rho_combination[ok])))
        st["detail"] = (f"mass {mass:.5f} vs 0.5 ({100 * rel_mass:.2f}%), lattice change {lat:.1e}, "
                        f"routes {routes:.1e} on {int(ok.sum())} cells")
        assert rel_mass <= 0.02
        assert lat <= 1e-8
        assert routes <= 1e-4 and ok.sum() >= 0.95 * ok.size


def test_criterion_08_equidistribution():
    with criterion(8, "equidistribution of torsion parameters", 600) as st:
        rep = equidist_experiment(section_fixture("legendre-x2"), Ns=(6, 12, 24), window=WINDOW,
                                  threads=THREADS)
        rows = {r["N"]: r for r in rep["rows"]}
        st["detail"] = ", ".join(f"D_{N} = {r['discrepancy']:.3f} ({r['hits']} hits)" for N, r in rows.items())
        assert rows[24]["discrepancy"] < rows[6]["discrepancy"]
        assert rows[24]["discrepancy"] <= 0.1
        assert rows[24]["hits"] >= 200


def test_criterion_09_small_sequence():
    with criterion(9, "small sequence along the golden direction", 600) as st:
        b = section_fixture("legendre-rank2")
        X = RealPoint(b.lifted, [1.0, (1 + 5 ** 0.5) / 2], gram=b.gram)
        rows = small_sequence(X, fibonacci_approximants(8), WINDOW, cover=b.cover, base_sections=b.base)
        vals = [r.h_X for r in rows if r.h_X is not None]
        st["detail"] = f"{len(vals)} terms, first {vals[0]:.3g}, last {vals[-1]:.3g}"
        assert len(vals) >= 6
        assert vals[-1] <= vals[0] / 10


def test_criterion_10_regulator():
    with criterion(10, "regulator non-degeneracy", 60) as st:
        b = section_fixture("legendre-rank2")
        G = b.gram
        exact_R = G[0][0] * G[1][1] - G[0][1] ** 2
        assert isinstance(exact_R, (int, F)) and exact_R > 0
        X = RealPoint(b.lifted, [1.0, 0.0], gram=G)
        rng = np.random.default_rng(10)
        worst_dep = 0.0
        for _ in range(100):
            u, v = rng.normal(size=2), rng.normal(size=2)
            A, B = X.with_coeffs(list(u)), X.with_coeffs(list(v))
            r1, r2 = regulator(A, B), regulator(B, A)
            assert r1 == r2 and r1 >= 0
            c = float(rng.normal()) * 3
            worst_dep = max(worst_dep, regulator(A, X.with_coeffs(list(c * u))))
        st["detail"] = f"R(P2,P3) = {exact_R} exactly; max R(X,cX) = {worst_dep:.1e}; 100 pairs symmetric, >= 0"
        assert worst_dep <= 1e-9
