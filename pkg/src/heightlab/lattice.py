"""Vectorized period-lattice numerics shared by the height and Betti modules.

Conventions: a curve with invariants b2..b8 is moved to Y^2 = 4X^3 - g2 X - g3
by X = x + b2/12, Y = 2y + a1 x + a3, so g2 = c4/12 and g3 = c6/216.  A lattice
is stored as a basis (w1, w2) with tau = w2/w1 in the upper half plane.  All
functions accept numpy arrays and broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

TWO_PI_I = 2j * np.pi
N_Q_TERMS = 12
GOOD_RESIDUAL = 1e-11
SEED_Q_TERMS = 3  # |q| <= 0.0044 on reduced bases, ample for seeding
_PERMS = list(permutations(range(3)))


@dataclass
class Lattice:
    w1: np.ndarray
    w2: np.ndarray
    g2: np.ndarray
    g3: np.ndarray

    @property
    def tau(self) -> np.ndarray:
        return self.w2 / self.w1

    def take(self, idx) -> "Lattice":
        return Lattice(self.w1[idx], self.w2[idx], self.g2[idx], self.g3[idx])


def cubic_roots(b2, b4, b6) -> np.ndarray:
    """Roots of 4x^3 + b2 x^2 + 2 b4 x + b6, shape (..., 3)."""
    b2, b4, b6 = np.broadcast_arrays(*(np.asarray(v, dtype=complex) for v in (b2, b4, b6)))
    shape = b2.shape
    comp = np.zeros(shape + (3, 3), dtype=complex)
    comp[..., 1, 0] = 1
    comp[..., 2, 1] = 1
    comp[..., 0, 2] = -b6 / 4
    comp[..., 1, 2] = -b4 / 2
    comp[..., 2, 2] = -b2 / 4
    roots = np.linalg.eigvals(comp)
    # one Newton polish per root for accuracy
    for _ in range(2):
        f = ((4 * roots + b2[..., None]) * roots + 2 * b4[..., None]) * roots + b6[..., None]
        df = (12 * roots + 2 * b2[..., None]) * roots + 2 * b4[..., None]
        ok = np.abs(df) > 1e-300
        roots = np.where(ok, roots - np.where(ok, f / np.where(ok, df, 1), 0), roots)
    return roots


def agm(a, b, iters: int = 40):
    """Complex AGM with the right choice of square root at each step."""
    a = np.asarray(a, dtype=complex).copy()
    b = np.asarray(b, dtype=complex).copy()
    for _ in range(iters):
        a1 = (a + b) / 2
        b1 = np.sqrt(a * b)
        flip = np.abs(a1 - b1) > np.abs(a1 + b1)
        b1 = np.where(flip, -b1, b1)
        done = np.all(np.abs(a1 - b1) <= 4e-16 * np.abs(a1))
        a, b = a1, b1
        if done:
            break
    return (a + b) / 2


def eisenstein_g2g3(w1, tau, terms: int = 40):
    """g2, g3 of the lattice w1 (Z + Z tau) from Eisenstein series."""
    q = np.exp(TWO_PI_I * np.asarray(tau))
    s3 = np.zeros_like(q)
    s5 = np.zeros_like(q)
    qn = np.ones_like(q)
    for n in range(1, terms + 1):
        qn = qn * q
        d3 = sum(d ** 3 for d in range(1, n + 1) if n % d == 0)
        d5 = sum(d ** 5 for d in range(1, n + 1) if n % d == 0)
        s3 = s3 + d3 * qn
        s5 = s5 + d5 * qn
    c = 2 * np.pi / np.asarray(w1)
    g2 = c ** 4 / 12 * (1 + 240 * s3)
    g3 = c ** 6 / 216 * (1 - 504 * s5)
    return g2, g3


def reduce_basis(w1, w2, max_steps: int = 64):
    """SL2(Z) change of basis putting tau in the standard fundamental domain."""
    w1 = np.array(w1, dtype=complex, copy=True)
    w2 = np.array(w2, dtype=complex, copy=True)
    flip = (w2 / w1).imag < 0
    w2 = np.where(flip, -w2, w2)
    for _ in range(max_steps):
        tau = w2 / w1
        n = np.round(tau.real)
        w2 = w2 - n * w1
        tau = w2 / w1
        inv = np.abs(tau) < 1 - 1e-14
        if not np.any(inv):
            break
        w1, w2 = np.where(inv, w2, w1), np.where(inv, -w1, w2)
    return w1, w2


def lattice_from_roots(e1, e2, e3, g2=None, g3=None) -> Lattice:
    """Period lattice of Y^2 = 4(X - e1)(X - e2)(X - e3), with e1 + e2 + e3 = 0.

    The AGM gives candidate periods for each ordering of the roots; the
    candidate whose Eisenstein series reproduce (g2, g3) is kept.
    """
    es = [np.asarray(e, dtype=complex) for e in np.broadcast_arrays(e1, e2, e3)]
    if g2 is None:
        g2 = -4 * (es[0] * es[1] + es[1] * es[2] + es[0] * es[2])
    if g3 is None:
        g3 = 4 * es[0] * es[1] * es[2]
    g2 = np.asarray(g2, dtype=complex)
    g3 = np.asarray(g3, dtype=complex)
    scale2 = np.maximum(np.abs(g2), 1e-300)
    scale3 = np.maximum(np.abs(g3), 1e-300)
    mag = np.maximum(np.abs(es[0]), np.maximum(np.abs(es[1]), np.abs(es[2])))
    best_w1 = best_w2 = None
    best_err = None
    for i, j, k in _PERMS:
        a, b, c = es[i], es[j], es[k]
        r13 = np.sqrt(a - c)
        w1 = np.pi / agm(r13, np.sqrt(a - b))
        w2 = 1j * np.pi / agm(r13, np.sqrt(b - c))
        ok = np.isfinite(w1) & np.isfinite(w2) & (np.abs((w2 / w1).imag) > 1e-12)
        w1 = np.where(ok, w1, 1.0)
        w2 = np.where(ok, w2, 1j)
        w1r, w2r = reduce_basis(w1, w2)
        h2, h3 = eisenstein_g2g3(w1r, w2r / w1r)
        err = np.abs(h2 - g2) / (scale2 + mag ** 2) + np.abs(h3 - g3) / (scale3 + mag ** 3)
        err = np.where(ok, err, np.inf)
        if best_err is None:
            best_w1, best_w2, best_err = w1r, w2r, err
        else:
            better = err < best_err
            best_w1 = np.where(better, w1r, best_w1)
            best_w2 = np.where(better, w2r, best_w2)
            best_err = np.where(better, err, best_err)
    if np.any(best_err > 1e-8):
        raise ArithmeticError("period computation failed the Eisenstein check")
    return Lattice(best_w1, best_w2, g2, g3)


def lattice_from_invariants(b2, b4, b6) -> Lattice:
    r = cubic_roots(b2, b4, b6)
    e = r + np.asarray(b2, dtype=complex)[..., None] / 12
    return lattice_from_roots(e[..., 0], e[..., 1], e[..., 2])


# functions on C / Lambda ------------------------------------------------------

def _reduced_w(z, lat: Lattice):
    """z / w1 moved to |Im| <= Im(tau)/2, |Re| <= 1/2 (as a lattice shift)."""
    tau = lat.tau
    w = np.asarray(z) / lat.w1
    k = np.round(w.imag / tau.imag)
    w = w - k * tau
    w = w - np.round(w.real)
    return w, tau


def wp_and_derivative(z, lat: Lattice, terms: int = N_Q_TERMS):
    """(wp(z), wp'(z)) from the q-expansions."""
    w, tau = _reduced_w(z, lat)
    q = np.exp(TWO_PI_I * tau)
    u = np.exp(TWO_PI_I * w)
    one_minus_u = -np.expm1(TWO_PI_I * w)
    s = u / one_minus_u ** 2
    sp = u * (1 + u) / one_minus_u ** 3
    const = np.zeros_like(q)
    qn = np.ones_like(q)
    for _ in range(terms):
        qn = qn * q
        a, b = qn * u, qn / u
        s = s + a / (1 - a) ** 2 + b / (1 - b) ** 2
        sp = sp + a * (1 + a) / (1 - a) ** 3 - b * (1 + b) / (1 - b) ** 3
        const = const + qn / (1 - qn) ** 2
    c = TWO_PI_I / lat.w1
    p = c ** 2 * (1.0 / 12 + s - 2 * const)
    dp = c ** 3 * sp
    return p, dp


def local_height_from_z(z, lat: Lattice, terms: int = N_Q_TERMS):
    """Archimedean Neron function of the point with elliptic log z."""
    w, tau = _reduced_w(z, lat)
    q = np.exp(TWO_PI_I * tau)
    u = np.exp(TWO_PI_I * w)
    T = w.imag / tau.imag
    B2 = T * T - T + 1.0 / 6
    val = -0.5 * B2 * np.log(np.abs(q)) - np.log(np.abs(np.expm1(TWO_PI_I * w)))
    qn = np.ones_like(q)
    for _ in range(terms):
        qn = qn * q
        val = val - np.log(np.abs((1 - qn * u) * (1 - qn / u)))
    return val


def _seed_grid(n: int = 6):
    a = (np.arange(n) + 0.5) / n - 0.5
    A, B = np.meshgrid(a, a, indexing="ij")
    return A.ravel(), B.ravel()


def _gn_residual(z, Xf, Yf, latf: Lattice):
    p, dp = wp_and_derivative(z, latf)
    res = np.abs(p - Xf) / (1 + np.abs(Xf)) + np.abs(dp - Yf) / (1 + np.abs(Yf))
    return np.where(np.isfinite(res), res, np.inf)


@np.errstate(all="ignore")
def _gauss_newton(z, Xf, Yf, latf: Lattice, iters: int):
    """Gauss-Newton on (wp - X, (wp' - Y)/sqrt(1+|X|)), iterating only unconverged entries."""
    z = np.array(z, dtype=complex, copy=True)
    active = np.arange(len(z))
    for _ in range(iters):
        if active.size == 0:
            break
        sub = latf.take(active) if active.size < len(z) else latf
        za, Xa, Ya = z[active], Xf[active], Yf[active]
        wgt = 1 / np.sqrt(1 + np.abs(Xa))
        p, dp = wp_and_derivative(za, sub)
        ddp = 6 * p * p - sub.g2 / 2
        r1 = p - Xa
        r2 = (dp - Ya) * wgt
        j2 = ddp * wgt
        den = np.abs(dp) ** 2 + np.abs(j2) ** 2
        step = -(np.conj(dp) * r1 + np.conj(j2) * r2) / np.where(den > 0, den, 1)
        cap = 0.25 * np.abs(sub.w1)
        step = np.where(np.abs(step) > cap, step / np.abs(step) * cap, step)
        step = np.where(np.isfinite(step), step, 0)
        z[active] = za + step
        done = np.abs(step) <= 1e-15 * (np.abs(za) + np.abs(sub.w1))
        active = active[~done]
    return z, _gn_residual(z, Xf, Yf, latf)


@np.errstate(all="ignore")
def elliptic_log(X, Y, lat: Lattice, seed=None, iters: int = 40, reduce: bool = True):
    """z with (wp(z), wp'(z)) = (X, Y), by Gauss-Newton on both equations.

    Without a seed the start is the best node of a coarse grid over the
    fundamental parallelogram; where that fails, the Laurent guess -2X/Y (good
    near the origin), the nearest half period (good near 2-torsion) and the
    other grid nodes are tried in turn.  With ``reduce`` the result is moved
    into the fundamental parallelogram.
    """
    X = np.asarray(X, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    X, Y = np.broadcast_arrays(X, Y)
    shape = X.shape
    Xf, Yf = X.ravel(), Y.ravel()
    latf = Lattice(*(np.broadcast_to(np.asarray(v, dtype=complex), shape).ravel()
                     for v in (lat.w1, lat.w2, lat.g2, lat.g3)))
    if seed is not None:
        z0 = np.broadcast_to(np.asarray(seed, dtype=complex), shape).ravel().copy()
        z, r = _gauss_newton(z0, Xf, Yf, latf, iters)
        bad = np.nonzero(r > GOOD_RESIDUAL)[0]
        if bad.size:
            z[bad] = elliptic_log(Xf[bad], Yf[bad], latf.take(bad), None, iters, False)
    else:
        A, B = _seed_grid()
        zs = (A[None, :] + B[None, :] * latf.tau[:, None]) * latf.w1[:, None]
        big = Lattice(*(np.repeat(v[:, None], len(A), axis=1) for v in
                        (latf.w1, latf.w2, latf.g2, latf.g3)))
        p, dp = wp_and_derivative(zs, big, terms=SEED_Q_TERMS)
        res = (np.abs(p - Xf[:, None]) / (1 + np.abs(Xf[:, None]))
               + np.abs(dp - Yf[:, None]) / (1 + np.abs(Yf[:, None])))
        order = np.argsort(res, axis=1)
        rows = np.arange(len(Xf))
        z, r = _gauss_newton(zs[rows, order[:, 0]], Xf, Yf, latf, iters)
        bad = np.nonzero(r > GOOD_RESIDUAL)[0]
        if bad.size:
            sub = latf.take(bad)
            halves = np.stack([sub.w1 / 2, sub.w2 / 2, (sub.w1 + sub.w2) / 2], axis=1)
            hp = wp_and_derivative(halves, Lattice(*(np.repeat(v[:, None], 3, axis=1) for v in
                                                     (sub.w1, sub.w2, sub.g2, sub.g3))))[0]
            z_half = halves[np.arange(bad.size), np.argmin(np.abs(hp - Xf[bad, None]), axis=1)]
            z_o = -2 * Xf[bad] / Yf[bad]
            z_o = np.where(np.isfinite(z_o), z_o, z_half)
            starts = [z_o, z_half] + [zs[bad, order[bad, k]] for k in range(1, len(A))]
            for start in starts:
                still = r[bad] > GOOD_RESIDUAL
                if not np.any(still):
                    break
                idx = bad[still]
                z2, r2 = _gauss_newton(start[still], Xf[idx], Yf[idx], latf.take(idx), iters)
                better = r2 < r[idx]
                z[idx] = np.where(better, z2, z[idx])
                r[idx] = np.minimum(r[idx], r2)
    if reduce:
        w, _ = _reduced_w(z, latf)
        z = w * latf.w1
    return z.reshape(shape)


def lattice_coordinates(z, w1, w2):
    """Real (a, b) with z = a w1 + b w2."""
    tau = w2 / w1
    xi = z / w1
    b = xi.imag / tau.imag
    a = xi.real - b * tau.real
    return a, b
