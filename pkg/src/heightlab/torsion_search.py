"""Torsion parameters of integer combinations of sections, and small sequences.

A combination Q = sum a_i P_i of genuine sections over a base coordinate w is
torsion of order dividing N at w exactly when N xi_Q(w) lies in Z + Z tau(w),
where xi_Q = sum a_i z_i / w1.  Newton runs on the holomorphic defect

    f(w) = xi_Q(w) - p - q tau(w),   (p, q) in (1/N) Z^2,

with the target (p, q) re-rounded from the Betti coordinates at every iterate.
When the sections live on a cover w -> t of the parameter line, search windows
and reported hits are in t and seeds are lifted through every preimage.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import lattice
from .algebraic import AlgebraicNumber
from .elliptic_core import DivisionValues, O, CurvePoint, add_points, mul_point
from .exact_arith import RatFunc, format_exact, to_fmpq, to_fraction
from .function_field import RealPoint, Section, gram_matrix
from .betti import _align, betti_coords, fiber_data, singular_parameters

log = logging.getLogger(__name__)

SEED_GRID = 32
NEWTON_ITERS = 40
DENOMINATOR_CAP = 10 ** 6
BETTI_TOL = 1e-10
PSI_TOL = 1e-8
EXACT_COMBO_CAP = 12  # largest sum |a_i| for exact group-law verification of mixed combinations


class AlreadyTorsion(ValueError):
    pass


@dataclass
class TorsionHit:
    t: complex
    w: complex
    N: int
    j: int
    k: int
    order: int
    betti_residual: float
    psi_residual: float
    iterations: int
    rational_t: Fraction | None = None
    exact: bool | None = None

    def to_row(self) -> dict:
        return {
            "N": self.N, "j": self.j, "k": self.k,
            "re_t": repr(self.t.real), "im_t": repr(self.t.imag),
            "betti_residual": f"{self.betti_residual:.3e}",
            "psi_residual": f"{self.psi_residual:.3e}",
            "rational_t": "" if self.rational_t is None else format_exact(self.rational_t),
        }


HIT_COLUMNS = ["N", "j", "k", "re_t", "im_t", "betti_residual", "psi_residual", "rational_t"]


@dataclass
class Combination:
    """Integer combination sum a_i P_i of genuine sections over one base."""

    sections: list
    coeffs: list

    def __post_init__(self):
        self.coeffs = [int(a) for a in self.coeffs]
        if len(self.sections) != len(self.coeffs):
            raise ValueError("one coefficient per section")
        for P in self.sections:
            if not P.has_y:
                raise ValueError("torsion search needs sections with y (pass to a cover)")

    @classmethod
    def of(cls, Q) -> "Combination":
        return Q if isinstance(Q, Combination) else cls([Q], [1])


# window handling ---------------------------------------------------------------------

def _in_rect(t, rect, pad=0.0):
    x0, x1, y0, y1 = rect
    return (t.real >= x0 - pad) & (t.real <= x1 + pad) & (t.imag >= y0 - pad) & (t.imag <= y1 + pad)


def _cover_values(cover: RatFunc | None, w):
    if cover is None:
        return np.asarray(w, dtype=complex)
    return np.asarray(cover.evaluate(np.asarray(w, dtype=complex)), dtype=complex)


def _lift(cover: RatFunc | None, t_seeds: np.ndarray) -> np.ndarray:
    """All preimages of the seed parameters under the cover."""
    if cover is None:
        return t_seeds
    num = np.array([float(c) for c in cover.num.coeffs()][::-1])
    den = np.array([float(c) for c in cover.den.coeffs()][::-1])
    n = max(len(num), len(den))
    num = np.pad(num, (n - len(num), 0))
    den = np.pad(den, (n - len(den), 0))
    out = [np.roots(num - t0 * den) for t0 in t_seeds]
    return np.concatenate(out) if out else np.zeros(0, dtype=complex)


def _singular_t(curve, cover):
    sing = singular_parameters(curve)
    if cover is None or not len(sing):
        return sing
    vals = _cover_values(cover, np.asarray(sing))
    return vals[np.isfinite(vals)]


def check_window(rect, curve, cover=None, guard: float = 1e-3):
    """Raise ValueError if the t-window comes within ``guard`` of a singular parameter."""
    x0, x1, y0, y1 = rect
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"empty window {rect}")
    for p in _singular_t(curve, cover):
        if _in_rect(np.asarray(p), rect, guard):
            raise ValueError(f"window {rect} meets the singular parameter {p:.6g}")


# Newton on the holomorphic defect ------------------------------------------------------

def _xi_q(data, coeffs):
    return sum(a * z for a, z in zip(coeffs, data.z)) / data.w1


def _betti_q(data, coeffs):
    b1 = np.zeros(np.shape(data.w1))
    b2 = np.zeros(np.shape(data.w1))
    tau = data.tau
    for a, z in zip(coeffs, data.z):
        c1, c2 = betti_coords(z / data.w1, tau)
        b1 = b1 + a * c1
        b2 = b2 + a * c2
    return b1, b2


def _defect(comb: Combination, N: int, w: np.ndarray):
    """f(w), f'(w) and the rounded target q, plus a mask of failed alignments."""
    h = 1e-5 * np.maximum(1.0, np.abs(w))
    c = fiber_data(comb.sections, w)
    plus = _align(c, fiber_data(comb.sections, w + h))
    minus = _align(c, fiber_data(comb.sections, w - h))
    b1, b2 = _betti_q(c, comb.coeffs)
    p, q = np.round(N * b1) / N, np.round(N * b2) / N
    f0 = _xi_q(c, comb.coeffs) - p - q * c.tau
    fp = _xi_q(plus, comb.coeffs) - p - q * plus.tau
    fm = _xi_q(minus, comb.coeffs) - p - q * minus.tau
    return f0, (fp - fm) / (2 * h), c.tau, plus.bad | minus.bad


def _newton(comb: Combination, N: int, w0: np.ndarray, step_cap: float, iters: int):
    """Vectorized Newton; returns (w, iterations, converged mask)."""
    w = np.array(w0, dtype=complex)
    its = np.zeros(w.shape, dtype=int)
    active = np.ones(w.shape, dtype=bool)
    done = np.zeros(w.shape, dtype=bool)
    scale = 1 + sum(abs(a) for a in comb.coeffs)
    for _ in range(iters):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        wa = w[idx]
        f0, d, _, bad = _defect(comb, N, wa)
        delta = -f0 / d
        big = np.abs(delta) > step_cap
        delta[big] *= step_cap / np.abs(delta[big])
        bad = bad | ~np.isfinite(delta)
        its[idx] += 1
        conv = (~bad) & (np.abs(f0) < 1e-13 * scale) & (np.abs(delta) < 1e-12 * np.maximum(1, np.abs(wa)))
        w[idx] = wa + np.where(bad, 0, delta)
        done[idx[conv]] = True
        active[idx[conv | bad]] = False
    return w, its, done


def _neighbor_seeds(comb: Combination, N: int, w: np.ndarray) -> np.ndarray:
    """Linearized guesses for the hits at the four Betti-neighbor targets of each hit."""
    if w.size == 0:
        return w
    _, d, tau, bad = _defect(comb, N, w)
    steps = [1 / N, -1 / N, tau / N, -tau / N]
    out = np.concatenate([w + s / d for s in steps])
    return out[np.isfinite(out) & np.tile(~bad, 4)]


# verification ---------------------------------------------------------------------------

def _root_distance(fn, x):
    """|g(x)| / |g'(x)| / max(1, |x|): relative distance of x to a simple root of g."""
    h = 1e-6 * max(1.0, abs(x))
    g = fn(x)
    dg = (fn(x + h) - fn(x - h)) / (2 * h)
    if g == 0:
        return 0.0
    if dg == 0 or not np.isfinite(dg):
        return math.inf
    return abs(g / dg) / max(1.0, abs(x))


def _complex_curve(curve, w):
    from .elliptic_core import WeierstrassCurve
    return WeierstrassCurve(*(complex(_cover_values(a, w)) if isinstance(a, RatFunc) else complex(a)
                              for a in curve.ainvs))


def _complex_point(comb: Combination, w):
    """Q_w by the group law in complex floating point."""
    Ec = _complex_curve(comb.sections[0].curve, w)
    Q = O
    for P, a in zip(comb.sections, comb.coeffs):
        if a == 0:
            continue
        pt = CurvePoint(complex(_cover_values(P.x, w)), complex(_cover_values(P.y, w)))
        Q = add_points(Ec, Q, mul_point(Ec, a, pt))
    return Ec, Q


def psi_residual(comb: Combination, w, N: int) -> float:
    """Relative root distance of x(Q_w) to the N-division locus (0 when Q_w = O)."""
    Ec, Q = _complex_point(comb, w)
    if Q.is_zero:
        return 0.0
    x = complex(Q.x)

    def fN(v):
        return complex(DivisionValues(Ec, v)(N))

    r = _root_distance(fN, x)
    if N % 2 == 0:
        r = min(r, _root_distance(Ec.two_torsion_cubic, x))
    return r


def betti_residual(comb: Combination, w, N: int):
    """(residual, j, k): distance of N beta_Q(w) to Z^2, divided by N, and the target."""
    data = fiber_data(comb.sections, np.array([w]))
    b1, b2 = _betti_q(data, comb.coeffs)
    j, k = np.round(N * b1[0]), np.round(N * b2[0])
    res = max(abs(N * b1[0] - j), abs(N * b2[0] - k)) / N
    return float(res), int(j) % N, int(k) % N


def recognize_rational(t: complex, cap: int = DENOMINATOR_CAP, tol: float = 2e-14):
    """Candidate rational value of a hit, or None.

    Any real is within ~1/(q cap) of a fraction with q <= cap, so the
    tolerance sits near the Newton accuracy (~1e-15), well below 1e-12.
    """
    if abs(t.imag) > tol * max(1.0, abs(t)):
        return None
    q = Fraction(t.real).limit_denominator(cap)
    if abs(float(q) - t.real) > tol * max(1.0, abs(t)):
        return None
    return q


def _alg_eval(f, a: AlgebraicNumber) -> AlgebraicNumber:
    if not isinstance(f, RatFunc):
        return AlgebraicNumber.from_rational(to_fraction(f))
    num = [to_fraction(c) for c in f.num.coeffs()]
    den = [to_fraction(c) for c in f.den.coeffs()]

    def horner(cs):
        acc = AlgebraicNumber.from_rational(Fraction(0))
        for c in reversed(cs):
            acc = acc * a + AlgebraicNumber.from_rational(c)
        return acc

    return horner(num) / horner(den)


def verify_exact(comb: Combination, t0: Fraction, w: complex, N: int, cover: RatFunc | None):
    """Exact check that Q is N-torsion over the rational parameter t0.

    Returns True/False, or None when the combination is too large for exact
    group-law arithmetic.
    """
    from .elliptic_core import WeierstrassCurve
    if cover is None:
        wa = AlgebraicNumber.from_rational(t0)
    else:
        poly = cover.num - cover.den * to_fmpq(t0)
        wa = AlgebraicNumber.root_of(poly, complex(w))
    E0 = comb.sections[0].curve
    E = WeierstrassCurve(*(_alg_eval(a, wa) for a in E0.ainvs))
    active = [(P, a) for P, a in zip(comb.sections, comb.coeffs) if a != 0]
    if len(active) == 1:
        P, a = active[0]
        x = _alg_eval(P.x, wa)
        dv = DivisionValues(E, x)
        if a != 1 and a != -1:
            if dv(abs(a)).is_zero():
                return True  # aP = O
            x = dv.x_multiple(abs(a))
    elif sum(abs(a) for _, a in active) <= EXACT_COMBO_CAP:
        Q = O
        for P, a in active:
            Q = add_points(E, Q, mul_point(E, a, CurvePoint(_alg_eval(P.x, wa), _alg_eval(P.y, wa))))
        if Q.is_zero:
            return True
        x = Q.x
    else:
        return None
    if N % 2 == 0 and E.two_torsion_cubic(x).is_zero():
        return True
    return DivisionValues(E, x)(N).is_zero()


def _is_torsion_section(comb: Combination) -> bool:
    G = gram_matrix(comb.sections)
    a = comb.coeffs
    q = sum(a[i] * a[j] * G[i][j] for i in range(len(a)) for j in range(len(a)))
    return q == 0


# public search ---------------------------------------------------------------------------

def find_torsion_params(Q, N: int, window, seeds: int = SEED_GRID, cover: RatFunc | None = None,
                        check_torsion: bool = True, iters: int = NEWTON_ITERS,
                        exact: bool = True, flood_rounds: int = 64) -> list[TorsionHit]:
    """Parameters t in the window where Q_t is torsion of order dividing N.

    ``Q`` is a Section or a Combination of genuine sections over w; ``cover``
    maps w to t (identity when None).  Hits are merged by t, verified by both
    residuals and sorted by (N, re t, im t).  After the seed grid, Newton is
    restarted from linearized guesses at the Betti-neighbor targets of every
    new hit, which fills in hits whose basins the grid missed.
    """
    comb = Combination.of(Q)
    N = int(N)
    if N < 1:
        raise ValueError("N must be positive")
    if check_torsion and _is_torsion_section(comb):
        raise AlreadyTorsion("section already torsion")
    curve = comb.sections[0].curve
    check_window(window, curve, cover)
    x0, x1, y0, y1 = window
    diam = math.hypot(x1 - x0, y1 - y0)
    g = (np.arange(seeds) + 0.5) / seeds
    T = (x0 + (x1 - x0) * g)[:, None] + 1j * (y0 + (y1 - y0) * g)[None, :]
    w0 = _lift(cover, T.ravel())
    step_cap = 0.1 * max(diam, np.max(np.abs(w0)) if w0.size else 1.0)
    sing_w = singular_parameters(curve)
    radius = 1e-8 * diam
    found: dict = {}

    def key(t):
        return (round(t.real / radius), round(t.imag / radius))

    def absorb(wc, its):
        """Add converged in-window points not seen before; return their w."""
        if len(sing_w):
            far = np.min(np.abs(wc[:, None] - sing_w[None, :]), axis=1) >= 1e-6
            wc, its = wc[far], its[far]
        tc = _cover_values(cover, wc)
        keep = _in_rect(tc, window)
        fresh = []
        for wi, ti, ni in zip(wc[keep], tc[keep], its[keep]):
            kx, ky = key(ti)
            if any((kx + dx, ky + dy) in found for dx in (-1, 0, 1) for dy in (-1, 0, 1)):
                continue
            found[(kx, ky)] = (complex(ti), complex(wi), int(ni))
            fresh.append(wi)
        return np.array(fresh, dtype=complex)

    w, its, ok = _newton(comb, N, w0, step_cap, iters)
    if not ok.all():
        log.debug("N=%d: %d of %d seeds did not converge", N, int((~ok).sum()), ok.size)
    fresh = absorb(w[ok], its[ok])
    # flood fill across neighboring Betti targets until nothing new turns up
    for _ in range(flood_rounds):
        if fresh.size == 0:
            break
        nb = _neighbor_seeds(comb, N, fresh)
        w, its, ok = _newton(comb, N, nb, step_cap, iters)
        fresh = absorb(w[ok], its[ok])

    hits: list[TorsionHit] = []
    for ti, wi, ni in found.values():
        bres, j, k = betti_residual(comb, wi, N)
        pres = psi_residual(comb, wi, N)
        if bres > BETTI_TOL or pres > PSI_TOL:
            log.info("discarding hit at t=%s: residuals %.2e / %.2e", ti, bres, pres)
            continue
        hit = TorsionHit(ti, wi, N, j, k, N // math.gcd(math.gcd(j, k), N), bres, pres, ni)
        q = recognize_rational(hit.t)
        if q is not None:
            ex = verify_exact(comb, q, wi, N, cover) if exact else None
            if ex is False:
                log.info("t=%s looks rational but fails the exact check", q)
            else:
                hit.rational_t, hit.exact = q, ex
        hits.append(hit)
    hits.sort(key=lambda h: (h.N, h.t.real, h.t.imag))
    return hits


# small sequences -------------------------------------------------------------------------

@dataclass
class SmallRow:
    n: int
    coeffs: tuple
    scale: int
    N: int | None
    t: complex | None
    w: complex | None
    h_X: float | None
    method: str
    error: float = 0.0
    rational_t: Fraction | None = None

    def to_json(self) -> dict:
        return {
            "n": self.n, "coeffs": list(self.coeffs), "scale": self.scale, "N": self.N,
            "t": None if self.t is None else [self.t.real, self.t.imag],
            "rational_t": None if self.rational_t is None else format_exact(self.rational_t),
            "h_X": self.h_X, "method": self.method, "error": self.error,
        }


def archimedean_proxy(X: RealPoint, coeffs, scale: int, w: complex) -> float:
    """Combination formula for the residual X - Q/M with archimedean local heights at w.

    At a torsion parameter of Q = sum a_i P_i the fiber height of X equals that
    of R = sum (x_i - a_i / M) P_i.  The proxy evaluates R's combination formula
    with the complex-place Neron function shifted by log|Delta| / 12, which is
    the whole height when the point is integral with good reduction everywhere.
    """
    eps = [float(x) - a / scale for x, a in zip(X.coeffs, coeffs)]
    data = fiber_data(X.basis, np.array([w]))
    lat = data.lattice()
    shift = math.log(abs(_complex_curve(X.basis[0].curve, w).discriminant)) / 12

    def lam(z):
        return float(lattice.local_height_from_z(np.asarray(z), lat)[0]) + shift

    total = sum(eps)
    val = 0.0
    for i, z in enumerate(data.z):
        c = eps[i] * eps[i] - eps[i] * (total - eps[i])
        if c:
            val += c * lam(z)
    for i in range(len(eps)):
        for j in range(i + 1, len(eps)):
            if eps[i] * eps[j]:
                val += eps[i] * eps[j] * lam(data.z[i] + data.z[j])
    return val


def _exact_fiber_height(X_base: RealPoint, X: RealPoint, t0: Fraction, w: complex):
    from .specialization import fiber_height_real
    hints = [complex(_cover_values(P.y, w)) for P in X.basis]
    r = fiber_height_real(X_base, t0, hints)
    return r.combination, r.error


def small_sequence(X: RealPoint, approximants, window, cover: RatFunc | None = None,
                   base_sections=None, N_budget=(2, 3, 4, 5, 6, 8), seeds: int = 16,
                   direction_tol: float = 1e-3) -> list[SmallRow]:
    """Rows (n, t_n, h_X(t_n)) along integer approximants a_n / M_n of X's coefficients.

    ``approximants`` is a list of (a_n, M_n).  For each n the first N in the
    budget with a hit in the window is used.  Rational hits get exact fiber
    heights through ``base_sections`` (the sections over t, possibly x-only);
    other hits get the archimedean proxy.
    """
    approximants = list(approximants)
    if not approximants:
        return []
    xs = np.array([float(c) for c in X.coeffs])
    a_last, M_last = approximants[-1]
    d = np.asarray(a_last, dtype=float)
    if np.linalg.norm(d / np.linalg.norm(d) - xs / np.linalg.norm(xs)) > direction_tol:
        raise ValueError("final approximant does not point along X's coefficient direction")
    X_base = None
    if base_sections is not None:
        X_base = RealPoint(list(base_sections), list(X.coeffs), gram=X.gram)
    rows = []
    for n, (a, M) in enumerate(approximants, start=1):
        comb = Combination(X.basis, list(a))
        row = SmallRow(n, tuple(int(v) for v in a), int(M), None, None, None, None, "missing")
        for N in N_budget:
            hits = find_torsion_params(comb, N, window, seeds=seeds, cover=cover,
                                       check_torsion=False, exact=False)
            if not hits:
                continue
            hit = min(hits, key=lambda h: (h.rational_t is None, abs(h.t - _center(window))))
            row.N, row.t, row.w = N, hit.t, hit.w
            if hit.rational_t is not None and X_base is not None:
                ex = verify_exact(comb, hit.rational_t, hit.w, N, cover)
                if ex:
                    row.rational_t = hit.rational_t
                    row.h_X, row.error = _exact_fiber_height(X_base, X, hit.rational_t, hit.w)
                    row.method = "exact-fiber"
                    break
            row.h_X = archimedean_proxy(X, a, M, hit.w)
            row.method = "archimedean-proxy"
            break
        rows.append(row)
    return rows


def _center(window):
    x0, x1, y0, y1 = window
    return complex((x0 + x1) / 2, (y0 + y1) / 2)


def fibonacci_approximants(count: int, start: int = 1):
    """(F_n, F_{n+1}) with scale F_n, approximating the direction (1, golden ratio)."""
    F = [0, 1]
    while len(F) < start + count + 2:
        F.append(F[-1] + F[-2])
    return [((F[n], F[n + 1]), F[n]) for n in range(start, start + count)]
