"""Experiment runners: equidistribution of torsion parameters, rank-drop tables and
the essential minimum of h_X.  Each returns a JSON-ready report dict."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np

from ..betti import section_density
from ..exact_arith import format_exact
from ..function_field import RealPoint
from ..heights_q import SingularFiber
from ..specialization import fiber_height_real, gram_and_det
from ..torsion_search import (AlreadyTorsion, Combination, _cover_values, _in_rect, _is_torsion_section,
                              _lift, archimedean_proxy, find_torsion_params, small_sequence,
                              verify_exact)
from .fixtures import CoveredBasis, CoveredSection

log = logging.getLogger(__name__)

LOW_STATISTICS = 25


def _pool_map(fn, items, threads: int):
    items = list(items)
    if threads <= 1:
        return [fn(v) for v in items]
    err = np.geterr()  # numpy error state is per thread; carry the caller's into workers

    def call(v):
        with np.errstate(**err):
            return fn(v)

    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(call, items))


def _unique_by_t(hits, radius):
    out = []
    for h in sorted(hits, key=lambda h: (h.t.real, h.t.imag)):
        if not any(abs(h.t - g.t) <= radius for g in out[-64:]):
            out.append(h)
    return out


# equidistribution ------------------------------------------------------------------------

def _box_index(t, window, k):
    x0, x1, y0, y1 = window
    i = np.clip(((t.real - x0) / (x1 - x0) * k).astype(int), 0, k - 1)
    j = np.clip(((t.imag - y0) / (y1 - y0) * k).astype(int), 0, k - 1)
    return i, j


def _preimage_box(cover, window, n_edge: int = 200):
    x0, x1, y0, y1 = window
    g = np.linspace(0, 1, n_edge)
    edge = np.concatenate([x0 + (x1 - x0) * g + 1j * y0, x0 + (x1 - x0) * g + 1j * y1,
                           x0 + 1j * (y0 + (y1 - y0) * g), x1 + 1j * (y0 + (y1 - y0) * g)])
    inner = (x0 + (x1 - x0) * g[::10])[:, None] + 1j * (y0 + (y1 - y0) * g[::10])[None, :]
    w = _lift(cover, np.concatenate([edge, inner.ravel()]))
    pad = 0.02 * max(np.ptp(w.real), np.ptp(w.imag))
    return w.real.min() - pad, w.real.max() + pad, w.imag.min() - pad, w.imag.max() + pad


def reference_box_masses(fixture: CoveredSection, window, partition: int = 10, n: int = 200):
    """Mass of the curvature density over each box of a partition of the t-window.

    The density is integrated on the cover base (where it is smooth) by the
    midpoint rule and binned by the image parameter, which handles the
    ramification of the cover without a singular integrand.
    """
    cover = fixture.cover
    if cover is None:
        bx = window
    else:
        bx = _preimage_box(cover, window)
    a0, a1, b0, b1 = bx
    du, dv = (a1 - a0) / n, (b1 - b0) / n
    u = a0 + du * (np.arange(n) + 0.5)
    v = b0 + dv * (np.arange(n) + 0.5)
    w = (u[:, None] + 1j * v[None, :]).ravel()
    t = _cover_values(cover, w)
    keep = _in_rect(t, window)
    w, t = w[keep], t[keep]
    rho = section_density(fixture.lifted, w, h=1e-3 * max(du, dv) * n / 10)
    ok = np.isfinite(rho)
    masses = np.zeros((partition, partition))
    i, j = _box_index(t[ok], window, partition)
    np.add.at(masses, (i, j), rho[ok] * du * dv)
    return masses, int((~ok).sum())


def equidist_experiment(fixture: CoveredSection, Ns=(6, 12, 24), window=(1.05, 5.0, -1.0, 1.0),
                        partition: int = 10, grid_n: int = 200, seeds: int = 32,
                        threads: int = 1) -> dict:
    """Box discrepancy between torsion parameters of order <= N and the curvature measure."""
    P = fixture.lifted
    if _is_torsion_section(Combination.of(P)):
        raise AlreadyTorsion("section already torsion: the curvature measure vanishes")
    Ns = sorted(int(N) for N in Ns)
    orders = list(range(2, Ns[-1] + 1))
    runs = _pool_map(lambda n: find_torsion_params(P, n, window, seeds=seeds, cover=fixture.cover,
                                                   check_torsion=False, exact=False),
                     orders, threads)
    by_order = dict(zip(orders, runs))
    x0, x1, y0, y1 = window
    radius = 1e-8 * math.hypot(x1 - x0, y1 - y0)

    ref, invalid = reference_box_masses(fixture, window, partition, grid_n)
    ref2, _ = reference_box_masses(fixture, window, partition, 2 * grid_n)
    m1, m2 = float(ref.sum()), float(ref2.sum())
    ref_p = ref2 / m2

    rows = []
    for N in Ns:
        hits = _unique_by_t([h for n in orders if n <= N for h in by_order[n]], radius)
        t = np.array([h.t for h in hits], dtype=complex)
        emp = np.zeros((partition, partition))
        if t.size:
            i, j = _box_index(t, window, partition)
            np.add.at(emp, (i, j), 1.0 / t.size)
        D = float(np.max(np.abs(emp - ref_p)))
        rows.append({"N": N, "hits": int(t.size), "discrepancy": D,
                     "low_statistics": bool(t.size < LOW_STATISTICS)})
    ds = [r["discrepancy"] for r in rows]
    return {
        "experiment": "equidist",
        "section": fixture.name,
        "window": list(window),
        "partition": partition,
        "rows": rows,
        "decreasing": bool(all(b < a for a, b in zip(ds, ds[1:]))),
        "reference_mass": [m1, m2],
        "normalization_change": abs(m2 - m1) / m2,
        "invalid_cells": invalid,
    }


def torsion_parameters_by_order(fixture: CoveredSection, N: int, window, seeds: int = 32):
    """Sorted unique torsion parameters of order dividing n for some n <= N."""
    x0, x1, y0, y1 = window
    hits = []
    for n in range(2, N + 1):
        hits += find_torsion_params(fixture.lifted, n, window, seeds=seeds, cover=fixture.cover,
                                    check_torsion=False, exact=False)
    return _unique_by_t(hits, 1e-8 * math.hypot(x1 - x0, y1 - y0))


# rank drop --------------------------------------------------------------------------------

DEFAULT_COMBOS = ((1, 0), (0, 1), (1, 1), (1, -1), (1, 2), (2, 1), (2, -1), (1, -2))


def _proxy_pair(basis: CoveredBasis, a, b, w):
    """(h_P2, h_P3) at a torsion parameter of aP2 + bP3 from the rank-one fiber form.

    The fiber Gram matrix has (a, b) in its kernel, so it equals c (b, -a)(b, -a)^T;
    c is fitted to the archimedean proxies of P2 and P3.
    """
    X = RealPoint(basis.lifted, [1.0, 0.0], gram=basis.gram)
    l2 = archimedean_proxy(X, (0, 0), 1, w)
    l3 = archimedean_proxy(X.with_coeffs([0.0, 1.0]), (0, 0), 1, w)
    c = (b * b * l2 + a * a * l3) / (a ** 4 + b ** 4)
    return c * b * b, c * a * a


def rankdrop_scan(basis: CoveredBasis, combos=DEFAULT_COMBOS, Ns=(2, 3, 4),
                  window=(1.05, 5.0, -1.0, 1.0), seeds: int = 16, threads: int = 1,
                  bins: int = 10) -> dict:
    """Tabulate h_{<P3>}(t) + h_{<P2>}(t) over torsion parameters of integer combinations."""
    if len(basis.lifted) != 2:
        raise ValueError("rank-drop scan expects a rank-two basis")
    tasks = [(tuple(c), int(N)) for c in combos for N in Ns]

    def run(task):
        (a, b), N = task
        comb = Combination(basis.lifted, [a, b])
        return find_torsion_params(comb, N, window, seeds=seeds, cover=basis.cover,
                                   check_torsion=False, exact=False)

    results = _pool_map(run, tasks, threads)
    rows = []
    seen = set()
    for ((a, b), N), hits in zip(tasks, results):
        comb = Combination(basis.lifted, [a, b])
        for h in hits:
            key = (a, b, round(h.t.real, 8), round(h.t.imag, 8))
            if key in seen:
                continue
            seen.add(key)
            row = {"combo": [a, b], "N": N, "t": [h.t.real, h.t.imag], "rational_t": None}
            exact_ok = h.rational_t is not None and verify_exact(comb, h.rational_t, h.w, N,
                                                                 basis.cover)
            if exact_ok:
                hints = [complex(_cover_values(P.y, h.w)) for P in basis.lifted]
                g = gram_and_det(basis.base, h.rational_t, hints)
                h2, h3 = float(g.matrix[0, 0]), float(g.matrix[1, 1])
                row.update(rational_t=format_exact(h.rational_t), method="exact-fiber",
                           error=float(g.errors[0, 0] + g.errors[1, 1]))
            else:
                h2, h3 = _proxy_pair(basis, a, b, h.w)
                row.update(method="archimedean-proxy", error=None)
            row.update(h_P2=h2, h_P3=h3, sum=h2 + h3)
            rows.append(row)
    sums = np.array([r["sum"] for r in rows])
    hist, edges = (np.histogram(sums, bins=bins) if sums.size else (np.zeros(0), np.zeros(0)))
    return {
        "experiment": "rankdrop",
        "basis": basis.name,
        "window": list(window),
        "rows": rows,
        "count": len(rows),
        "minimum": float(sums.min()) if sums.size else None,
        "nonnegative": bool((sums >= -1e-6).all()),
        "zero_rows": int(sum(1 for r in rows if min(abs(r["h_P2"]), abs(r["h_P3"])) <= 1e-9)),
        "histogram": {"counts": hist.tolist(), "edges": edges.tolist()},
    }


# essential minimum --------------------------------------------------------------------------

def _random_rationals(rng, budget: int, bound: int):
    out = []
    while len(out) < budget:
        p = int(rng.integers(-bound, bound + 1))
        q = int(rng.integers(1, bound + 1))
        v = Fraction(p, q)
        if v not in out:
            out.append(v)
    return out


def essential_min_scan(X: RealPoint, budget: int = 0, approximants=(), window=(1.05, 5.0, -1.0, 1.0),
                       cover=None, base_sections=None, height_bound: int = 12, seed: int = 0) -> dict:
    """Lower envelope of h_X along a small sequence and over random rational parameters.

    Random parameters are drawn on the base of X's sections, where they are
    genuine, so the fiber heights are exact there.
    """
    rows = small_sequence(X, approximants, window, cover=cover, base_sections=base_sections) \
        if approximants else []
    envelope = []
    best = math.inf
    for r in rows:
        if r.h_X is not None:
            best = min(best, r.h_X)
        envelope.append(None if best == math.inf else best)
    rng = np.random.default_rng(seed)
    rand = []
    for w0 in _random_rationals(rng, budget, height_bound):
        try:
            r = fiber_height_real(X, w0)
        except (SingularFiber, ZeroDivisionError, ArithmeticError) as exc:
            log.info("skipping %s: %s", w0, exc)
            continue
        rand.append({"w": format_exact(w0), "h_X": r.combination, "gram_form": r.gram_form,
                     "error": r.error})
    inf_a = min((r.h_X for r in rows if r.h_X is not None), default=None)
    inf_b = min((r["h_X"] for r in rand), default=None)
    vals = [v for v in (inf_a, inf_b) if v is not None]
    return {
        "experiment": "essential_min",
        "small_sequence": [r.to_json() for r in rows],
        "envelope": envelope,
        "random": rand,
        "inf_small_sequence": inf_a,
        "inf_random": inf_b,
        "inf": min(vals) if vals else None,
    }
