"""Betti maps and curvature densities over the complex base.

For a section P over a base coordinate w, write the elliptic log of P_w as
z = xi * w1 with xi = b1 + b2 tau, tau = w2 / w1.  The Betti coordinates are
the real pair (b1, b2), and the density of the pulled-back form db1 ^ db2 is

    rho = |xi' - b2 tau'|^2 / Im(tau)

with ' = d/dw, because xi and tau are holomorphic once the branches are
continued.  Three routes are provided: that formula (holomorphic finite
differences), the real Jacobian determinant of the Betti map, and the
quadratic combination of single-section densities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from . import lattice
from .elliptic_core import WeierstrassCurve
from .exact_arith import RatFunc
from .function_field import RealPoint, Section

FD_REL_STEP = 1e-3
GUARD_RADIUS = 1e-3


class ContinuationError(ArithmeticError):
    pass


# evaluation of the family on complex parameter arrays ------------------------------

def _eval(f, w):
    if isinstance(f, RatFunc):
        return np.asarray(f.evaluate(np.asarray(w, dtype=complex)), dtype=complex)
    return np.full(np.shape(w), complex(f))


@dataclass
class FiberData:
    """Lattice basis and elliptic logs of the tracked sections over parameter values."""

    w1: np.ndarray
    w2: np.ndarray
    g2: np.ndarray
    g3: np.ndarray
    z: list

    @property
    def tau(self):
        return self.w2 / self.w1

    def lattice(self) -> lattice.Lattice:
        return lattice.Lattice(self.w1, self.w2, self.g2, self.g3)


def fiber_data(sections: list, w, seeds=None) -> FiberData:
    """Periods and elliptic logs of the sections at the parameters w (any shape)."""
    w = np.asarray(w, dtype=complex)
    E = sections[0].curve
    a1, a2, a3, a4, a6 = (_eval(a, w) for a in E.ainvs)
    b2 = a1 * a1 + 4 * a2
    b4 = 2 * a4 + a1 * a3
    b6 = a3 * a3 + 4 * a6
    lat = lattice.lattice_from_invariants(b2, b4, b6)
    zs = []
    for k, P in enumerate(sections):
        if P.is_zero:
            zs.append(np.zeros_like(w))
            continue
        x = _eval(P.x, w)
        y = _eval(P.y, w)
        X = x + b2 / 12
        Y = 2 * y + a1 * x + a3
        seed = None if seeds is None else seeds[k]
        zs.append(lattice.elliptic_log(X, Y, lat, seed=seed, reduce=seed is None))
    return FiberData(lat.w1, lat.w2, lat.g2, lat.g3, zs)


def _align(ref: FiberData, other: FiberData) -> FiberData:
    """Re-express ``other`` in the basis continuing ``ref`` and move its logs next to ref's."""
    a, b = lattice.lattice_coordinates(ref.w1, other.w1, other.w2)
    c, d = lattice.lattice_coordinates(ref.w2, other.w1, other.w2)
    a, b, c, d = (np.round(v) for v in (a, b, c, d))
    W1 = a * other.w1 + b * other.w2
    W2 = c * other.w1 + d * other.w2
    zs = []
    for z_ref, z in zip(ref.z, other.z):
        m, n = lattice.lattice_coordinates(z - z_ref, W1, W2)
        zs.append(z - np.round(m) * W1 - np.round(n) * W2)
    out = FiberData(W1, W2, other.g2, other.g3, zs)
    out.bad = np.abs(np.abs(a * d - b * c) - 1) > 0.5
    return out


def betti_coords(xi, tau):
    """(b1, b2) with xi = b1 + b2 tau."""
    b2 = xi.imag / tau.imag
    return xi.real - b2 * tau.real, b2


# public single-fiber operations --------------------------------------------------------

def periods_agm(E: WeierstrassCurve):
    """(w1, w2, tau) of a fiber with complex or rational coefficients, tau reduced."""
    c = [complex(a) if not isinstance(a, complex) else a for a in
         (float(v) if not isinstance(v, complex) else v for v in E.ainvs)]
    Ec = WeierstrassCurve(*c)
    if abs(Ec.discriminant) == 0:
        raise ArithmeticError("singular fiber")
    lat = lattice.lattice_from_invariants(Ec.b2, Ec.b4, Ec.b6)
    w1, w2 = complex(lat.w1), complex(lat.w2)
    return w1, w2, w2 / w1


def elliptic_log_point(E: WeierstrassCurve, P, seed=None) -> complex:
    """Elliptic log of a point with complex coordinates; 0 for the origin."""
    if P.x is None:
        return 0j
    c = [complex(v) for v in E.ainvs]
    Ec = WeierstrassCurve(*c)
    lat = lattice.lattice_from_invariants(Ec.b2, Ec.b4, Ec.b6)
    x, y = complex(P.x), complex(P.y)
    X = x + Ec.b2 / 12
    Y = 2 * y + c[0] * x + c[2]
    return complex(lattice.elliptic_log(X, Y, lat, seed=seed))


@dataclass
class BettiState:
    """Continuation anchor: parameter, continued basis and logs per section."""

    t: complex
    w1: complex
    w2: complex
    z: list
    betti: list = field(default_factory=list)

    @property
    def tau(self):
        return self.w2 / self.w1

    def to_json(self) -> dict:
        def c(v):
            return [v.real, v.imag]
        return {"t": c(self.t), "w1": c(self.w1), "w2": c(self.w2),
                "z": [c(v) for v in self.z], "betti": [list(b) for b in self.betti]}

    @classmethod
    def from_json(cls, data) -> "BettiState":
        def c(v):
            return complex(v[0], v[1])
        return cls(c(data["t"]), c(data["w1"]), c(data["w2"]), [c(v) for v in data["z"]],
                   [tuple(b) for b in data["betti"]])


def _state_from(data: FiberData, t, idx=()) -> BettiState:
    z = [complex(v[idx]) for v in data.z]
    w1, w2 = complex(data.w1[idx]), complex(data.w2[idx])
    tau = w2 / w1
    betti = [tuple(float(u) for u in betti_coords(np.asarray(v / w1), np.asarray(tau))) for v in z]
    return BettiState(complex(t), w1, w2, z, betti)


def anchor_state(sections: list, t) -> BettiState:
    """Principal (lattice-reduced) Betti data at an anchor parameter."""
    return _state_from(fiber_data(sections, np.array([t])), t, 0)


def continue_state(sections: list, state: BettiState, t, max_step: float = 0.1,
                   _depth: int = 0) -> BettiState:
    """Carry the anchor's branches along the straight path to t.

    A step whose Betti coordinates move by 0.5 or more is redone in halves.
    """
    t = complex(t)
    n = max(1, int(math.ceil(abs(t - state.t) / max_step)))
    cur = state
    for k in range(1, n + 1):
        tk = state.t + (t - state.t) * k / n
        nxt = _step(sections, cur, tk)
        if _jump(cur, nxt) >= 0.5:
            if _depth >= 12:
                raise ContinuationError("Betti continuation failed to stabilize")
            nxt = continue_state(sections, cur, tk, abs(tk - cur.t) / 2, _depth + 1)
        cur = nxt
    return cur


def _jump(a: BettiState, b: BettiState) -> float:
    return max((abs(u - v) for p, q in zip(a.betti, b.betti) for u, v in zip(p, q)), default=0.0)


def _step(sections, cur: BettiState, t) -> BettiState:
    ref = FiberData(np.array([cur.w1]), np.array([cur.w2]), None, None,
                    [np.array([z]) for z in cur.z])
    new = fiber_data(sections, np.array([t]))
    al = _align(ref, new)
    return _state_from(al, t, 0)


def betti_map(X: RealPoint, t, state: BettiState | None = None):
    """(b1, b2) of X at t; with a state, continued from it, else principal at t.

    Returns the pair and the state at t.
    """
    sections = X.basis
    if state is None:
        st = anchor_state(sections, t)
    else:
        st = continue_state(sections, state, t)
    b = np.zeros(2)
    for c, bi in zip(X.coeffs, st.betti):
        b = b + float(c) * np.asarray(bi)
    return (float(b[0]), float(b[1])), st


# densities -------------------------------------------------------------------------

_FD5 = np.array([1.0, -8.0, 8.0, -1.0]) / 12  # f' ~ sum c_k f(w + s_k h) / h
_FD5_SHIFTS = np.array([-2.0, -1.0, 1.0, 2.0])


def _stencil(sections, w, h, directions=(1.0,)):
    """Center data and aligned data at w + s h d for each direction d and shift s."""
    w = np.asarray(w, dtype=complex)
    center = fiber_data(sections, w)
    out = []
    for d in directions:
        pts = []
        for s in _FD5_SHIFTS:
            nb = fiber_data(sections, w + s * h * d)
            pts.append(_align(center, nb))
        out.append(pts)
    return center, out


def _holomorphic_density_from(center: FiberData, pts, h, k):
    tau_c = center.tau
    xi_c = center.z[k] / center.w1
    dxi = sum(c * (p.z[k] / p.w1) for c, p in zip(_FD5, pts)) / h
    dtau = sum(c * p.tau for c, p in zip(_FD5, pts)) / h
    _, b2 = betti_coords(xi_c, tau_c)
    rho = np.abs(dxi - b2 * dtau) ** 2 / tau_c.imag
    bad = np.zeros(np.shape(rho), dtype=bool)
    for p in pts:
        bad |= p.bad
    return np.where(bad, np.nan, rho)


def _step_size(w, h):
    if h is None:
        return FD_REL_STEP * np.maximum(1.0, np.abs(np.asarray(w)))
    return np.broadcast_to(np.asarray(h, dtype=float), np.shape(w))


def section_density(section: Section, w, h=None) -> np.ndarray:
    """rho_P at parameters w by the holomorphic formula (NaN where continuation failed)."""
    w = np.asarray(w, dtype=complex)
    hh = _step_size(w, h)
    center, (pts,) = _stencil([section], w, hh)
    return _holomorphic_density_from(center, pts, hh, 0)


def jacobian_density(X: RealPoint, w, h=None, basis_change=None) -> np.ndarray:
    """|det d(b1, b2)/d(Re w, Im w)| of the Betti map of X, by 5-point differences.

    ``basis_change`` = (a, b, c, d) replaces (w1, w2) by (a w1 + b w2, c w1 + d w2).
    """
    w = np.asarray(w, dtype=complex)
    hh = _step_size(w, h)
    center, (pu, pv) = _stencil(X.basis, w, hh, directions=(1.0, 1j))
    coeffs = [float(c) for c in X.coeffs]

    def beta(data: FiberData):
        w1, w2 = data.w1, data.w2
        if basis_change is not None:
            a, b, c, d = basis_change
            w1, w2 = a * w1 + b * w2, c * w1 + d * w2
        tau = w2 / w1
        tot1 = np.zeros(np.shape(w))
        tot2 = np.zeros(np.shape(w))
        for c, z in zip(coeffs, data.z):
            b1, b2 = betti_coords(z / w1, tau)
            tot1 = tot1 + c * b1
            tot2 = tot2 + c * b2
        return tot1, tot2

    def deriv(pts):
        vals = [beta(p) for p in pts]
        d1 = sum(c * v[0] for c, v in zip(_FD5, vals)) / hh
        d2 = sum(c * v[1] for c, v in zip(_FD5, vals)) / hh
        return d1, d2

    # the center data is not used by the stencil, but its basis fixes the branches
    du1, du2 = deriv(pu)
    dv1, dv2 = deriv(pv)
    rho = np.abs(du1 * dv2 - du2 * dv1)
    bad = np.zeros(np.shape(rho), dtype=bool)
    for p in pu + pv:
        bad |= p.bad
    return np.where(bad, np.nan, rho)


def combination_density(X: RealPoint, w, h=None, sums: dict | None = None) -> np.ndarray:
    """sum (x_i^2 - x_i sum_{j != i} x_j) rho_{P_i} + sum_{i<j} x_i x_j rho_{P_i + P_j}."""
    xs = [float(c) for c in X.coeffs]
    total = sum(xs)
    rho = np.zeros(np.shape(w))
    for i, P in enumerate(X.basis):
        c = xs[i] * xs[i] - xs[i] * (total - xs[i])
        if c != 0:
            rho = rho + c * section_density(P, w, h)
    n = len(xs)
    for i in range(n):
        for j in range(i + 1, n):
            if xs[i] * xs[j] != 0:
                S = (sums or {}).get((i, j)) or (X.basis[i] + X.basis[j])
                rho = rho + xs[i] * xs[j] * section_density(S, w, h)
    return rho


# grids ---------------------------------------------------------------------------------

def singular_parameters(curve: WeierstrassCurve) -> np.ndarray:
    """Finite parameters with a singular fiber or a pole of a coefficient."""
    pts = []
    disc = curve.discriminant
    disc = disc if isinstance(disc, RatFunc) else RatFunc.const(disc)
    for part in (disc.num, disc.den):
        if part.degree() > 0:
            pts.extend(complex(r) for r, _ in part.complex_roots())
    for a in curve.ainvs:
        if isinstance(a, RatFunc) and a.den.degree() > 0:
            pts.extend(complex(r) for r, _ in a.den.complex_roots())
    out = []
    for p in pts:
        if all(abs(p - q) > 1e-12 for q in out):
            out.append(p)
    return np.array(out, dtype=complex)


@dataclass
class DensityGrid:
    rect: tuple
    n: int
    params: np.ndarray
    rho: np.ndarray
    rho_combination: np.ndarray | None
    valid: np.ndarray

    def cell_area(self) -> float:
        x0, x1, y0, y1 = self.rect
        return (x1 - x0) * (y1 - y0) / self.n ** 2

    def mass(self) -> float:
        return float(np.nansum(np.where(self.valid, self.rho, 0.0)) * self.cell_area())

    def rows(self):
        for w, r in zip(self.params.ravel(), np.where(self.valid, self.rho, np.nan).ravel()):
            yield w.real, w.imag, r


def check_rect(rect, curve: WeierstrassCurve, guard: float = GUARD_RADIUS):
    x0, x1, y0, y1 = rect
    if not (x1 > x0 and y1 > y0):
        raise ValueError("empty rectangle")
    for p in singular_parameters(curve):
        px = min(max(p.real, x0), x1)
        py = min(max(p.imag, y0), y1)
        if abs(complex(px, py) - p) < guard:
            raise ValueError(f"rectangle meets the singular parameter {p:.6g} (guard {guard})")


def grid_points(rect, n: int) -> np.ndarray:
    x0, x1, y0, y1 = rect
    xs = x0 + (np.arange(n) + 0.5) * (x1 - x0) / n
    ys = y0 + (np.arange(n) + 0.5) * (y1 - y0) / n
    U, V = np.meshgrid(xs, ys, indexing="ij")
    return U + 1j * V


def density_grid(X: RealPoint, rect, n: int, combination: bool = True,
                 guard: float = GUARD_RADIUS) -> DensityGrid:
    """Midpoint samples of rho_X over rect, step (width)/(4n) for the differences."""
    check_rect(rect, X.basis[0].curve, guard)
    W = grid_points(rect, n)
    h = (rect[1] - rect[0]) / (4 * n)
    rho = jacobian_density(X, W, h)
    comb = combination_density(X, W, h) if combination else None
    rho = np.where(rho < 0, 0.0, rho)
    valid = np.isfinite(rho)
    return DensityGrid(tuple(rect), n, W, rho, comb, valid)


def pushforward_density(rho_cover: np.ndarray, dt_dw: np.ndarray) -> np.ndarray:
    """Density on the base from a density on a cover chart: rho / |dt/dw|^2."""
    return rho_cover / np.abs(dt_dw) ** 2


# total mass ----------------------------------------------------------------------------

def _bump(r):
    """C-infinity: 1 on [0, 1/2], 0 on [1, inf)."""
    r = np.asarray(r, dtype=float)
    s = np.clip(2 * r - 1, 0.0, 1.0)
    with np.errstate(all="ignore"):
        f = lambda u: np.where(u > 0, np.exp(-1 / np.where(u > 0, u, 1)), 0.0)  # noqa: E731
        out = f(1 - s) / (f(1 - s) + f(s))
    return np.where(r <= 0.5, 1.0, np.where(r >= 1, 0.0, out))


@dataclass
class MassReport:
    total: float
    tail_estimate: float
    pieces: dict
    raw: float


def _gauss(n):
    x, wts = np.polynomial.legendre.leggauss(n)
    return x, wts


def _disk_profile(density_at, center, R, Ls, n_theta, n_gauss, inverted=False):
    """Cumulative integrals of bump * rho over log-polar annuli r in [e^-L, R]."""
    gx, gw = _gauss(n_gauss)
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    edges = np.concatenate([[math.log(R)], -np.asarray(Ls, dtype=float)])
    cum = []
    acc = 0.0
    for hi, lo in zip(edges[:-1], edges[1:]):
        n_pan = max(1, int(math.ceil(hi - lo)))
        bounds = np.linspace(lo, hi, n_pan + 1)
        for a, b in zip(bounds[:-1], bounds[1:]):
            u = (a + b) / 2 + (b - a) / 2 * gx
            U, T = np.meshgrid(u, theta, indexing="ij")
            Rr = np.exp(U)
            pts = Rr * np.exp(1j * T)
            if inverted:
                w = 1 / pts
                rho = density_at(w) / np.abs(pts) ** 4
            else:
                w = center + pts
                rho = density_at(w)
            vals = np.nan_to_num(rho, nan=0.0) * _bump(Rr / R) * Rr ** 2
            acc += float(np.sum(vals.mean(axis=1) * 2 * np.pi * (b - a) / 2 * gw))
        cum.append(acc)
    return np.array(cum)


def _extrapolate(Ls, cum):
    """Fit I(L) = A - c/(L + k)^2 to the cumulative profile; returns (A, tail)."""
    Ls = np.asarray(Ls, dtype=float)
    try:
        p, _ = curve_fit(lambda L, A, c, k: A - c / (L + k) ** 2, Ls, cum,
                         p0=(cum[-1], 1.0, 1.0), maxfev=20000)
        A = float(p[0])
        if not np.isfinite(A) or abs(A - cum[-1]) > 10 * abs(cum[-1] - cum[0]) + 1e-12:
            raise RuntimeError
        return A, A - float(cum[-1])
    except (RuntimeError, ValueError):
        return float(cum[-1]), 0.0


def total_mass(section: Section, Ls=(6, 8, 10, 12, 14), n_theta: int = 48, n_gauss: int = 6,
               n_box: int = 320, h_rel: float = 1e-3) -> MassReport:
    """Integral of rho_P over the whole base plane.

    A smooth partition of unity isolates each singular parameter and infinity;
    those pieces are integrated in log-polar coordinates down to radius e^-L
    and extrapolated in L (the density decays like 1/(r^2 log^3(1/r))); the
    rest is a smooth compactly supported integrand on a box (trapezoid rule).
    """
    sing = singular_parameters(section.curve)
    if len(sing) == 0:
        raise ValueError("no singular parameters: the family is isotrivial or constant")
    radii = []
    for i, p in enumerate(sing):
        others = [abs(p - q) for j, q in enumerate(sing) if j != i]
        radii.append(0.45 * min(others + [2.0]))
    outer = max(abs(p) + r for p, r in zip(sing, radii)) + 1.0
    R_inf = 1 / outer  # bump on |1/w| < R_inf, i.e. |w| > outer (fully 1 beyond 2 outer)

    def dens(w):
        hh = h_rel * np.abs(w - _nearest(w, sing))
        hh = np.minimum(hh, h_rel * np.maximum(1.0, np.abs(w)))
        return section_density(section, w, hh)

    pieces = {}
    raw = 0.0
    tail = 0.0
    for p, R in zip(sing, radii):
        cum = _disk_profile(dens, p, R, Ls, n_theta, n_gauss)
        A, t = _extrapolate(Ls, cum)
        pieces[f"{p:.6g}"] = A
        raw += cum[-1]
        tail += t
    cum = _disk_profile(dens, 0, R_inf, Ls, n_theta, n_gauss, inverted=True)
    A, t = _extrapolate(Ls, cum)
    pieces["inf"] = A
    raw += cum[-1]
    tail += t
    # remainder on the box |Re w|, |Im w| <= 2 outer
    half = 2 * outer
    xs = -half + (np.arange(n_box) + 0.5) * (2 * half / n_box)
    U, V = np.meshgrid(xs, xs, indexing="ij")
    W = U + 1j * V
    weight = 1 - _bump(1 / (np.abs(W) * R_inf))
    for p, R in zip(sing, radii):
        weight = weight - _bump(np.abs(W - p) / R)
    mask = weight > 1e-14
    vals = np.zeros(W.shape)
    vals[mask] = np.nan_to_num(dens(W[mask]), nan=0.0) * weight[mask]
    rest = float(vals.sum() * (2 * half / n_box) ** 2)
    pieces["rest"] = rest
    raw += rest
    return MassReport(raw + tail, tail, pieces, raw)


def _nearest(w, pts):
    w = np.asarray(w)
    idx = np.argmin(np.abs(w[..., None] - pts), axis=-1)
    return pts[idx]
