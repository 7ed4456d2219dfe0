"""Specializing sections and real points at rational parameters.

Fiber points carry AlgebraicNumber coordinates: x-only sections get their
y-coordinate from an exact square root, with the branch fixed by a complex
hint (for instance the value of the cover coordinate at the parameter).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from .algebraic import AlgebraicNumber, alg_sqrt
from .elliptic_core import O, CurvePoint, WeierstrassCurve, add_points
from .exact_arith import format_exact, to_fmpq, to_fraction, weil_height_rational
from .function_field import RealPoint, Section
from .heights_q import (CanonicalHeight, SingularFiber, canonical_height_fiberpoint,
                        specialize_curve)

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
FIBER_DEPTH = 7


@dataclass
class FiberContext:
    t0: Fraction
    curve: WeierstrassCurve
    points: list
    smooth: bool = True


@dataclass
class GramRecord:
    t0: Fraction
    matrix: np.ndarray
    determinant: float
    errors: np.ndarray

    def to_json(self) -> dict:
        return {
            "t0": format_exact(self.t0),
            "matrix": self.matrix.tolist(),
            "determinant": self.determinant,
            "errors": self.errors.tolist(),
        }


def _alg(v) -> AlgebraicNumber:
    return v if isinstance(v, AlgebraicNumber) else AlgebraicNumber.from_rational(to_fraction(v))


def fiber_curve(P: Section, t0) -> WeierstrassCurve:
    try:
        return specialize_curve(P.curve, t0)
    except SingularFiber:
        raise SingularFiber(f"singular fiber at t = {format_exact(to_fraction(t0))}") from None


def specialize(P: Section, t0, y_hint=None) -> CurvePoint:
    """P_{t0} with exact algebraic coordinates; a pole of x sends P to O.

    For an x-only section ``y_hint`` (a complex number) selects the square-root
    branch; without it the principal root of (2y + a1 x + a3)^2 is used.
    """
    t0 = to_fraction(t0)
    E = fiber_curve(P, t0)
    if P.is_zero:
        return O
    if P.x.den(to_fmpq(t0)) == 0:
        return O
    x0 = P.x.evaluate(t0)
    if P.y is not None:
        if P.y.den(to_fmpq(t0)) == 0:
            return O
        pt = CurvePoint(_alg(x0), _alg(P.y.evaluate(t0)))
    else:
        a1, a3 = E.a1, E.a3
        F = E.two_torsion_cubic(x0)
        w_hint = None if y_hint is None else 2 * complex(y_hint) + float(a1 * x0 + a3)
        w = alg_sqrt(_alg(F), w_hint)
        pt = CurvePoint(_alg(x0), (w - _alg(a1 * x0 + a3)) * AlgebraicNumber.from_rational(
            Fraction(1, 2)))
    if not E.equation_residual(pt).is_zero():
        raise ArithmeticError("specialized point is not on the fiber")
    return pt


def fiber_context(sections: list, t0, y_hints=None) -> FiberContext:
    hints = y_hints or [None] * len(sections)
    t0 = to_fraction(t0)
    E = fiber_curve(sections[0], t0)
    pts = [specialize(P, t0, h) for P, h in zip(sections, hints)]
    return FiberContext(t0, E, pts, True)


def point_height(E: WeierstrassCurve, pt: CurvePoint, depth: int = FIBER_DEPTH) -> CanonicalHeight:
    if pt.is_zero:
        return CanonicalHeight(0.0, 0.0, "local-sum")
    return canonical_height_fiberpoint(E, pt.x, depth)


def fiber_height(P: Section, t0, depth: int = FIBER_DEPTH) -> CanonicalHeight:
    """h_P(t0); only x(P_{t0}) is needed."""
    t0 = to_fraction(t0)
    E = fiber_curve(P, t0)
    if P.is_zero or P.x.den(to_fmpq(t0)) == 0:
        return CanonicalHeight(0.0, 0.0, "local-sum")
    return canonical_height_fiberpoint(E, P.x.evaluate(t0), depth)


@dataclass
class _FiberHeights:
    """Heights of P_i, P_i + P_j and P_i - P_j on one fiber, computed once."""

    ctx: FiberContext
    depth: int
    single: list = field(default_factory=list)
    plus: dict = field(default_factory=dict)
    minus: dict = field(default_factory=dict)

    def __post_init__(self):
        E = self.ctx.curve
        pts = self.ctx.points
        self.single = [point_height(E, p, self.depth) for p in pts]

    def sum_height(self, i, j) -> CanonicalHeight:
        if (i, j) not in self.plus:
            E, pts = self.ctx.curve, self.ctx.points
            self.plus[(i, j)] = point_height(E, add_points(E, pts[i], pts[j]), self.depth)
        return self.plus[(i, j)]

    def diff_height(self, i, j) -> CanonicalHeight:
        if (i, j) not in self.minus:
            E, pts = self.ctx.curve, self.ctx.points
            self.minus[(i, j)] = point_height(E, add_points(E, pts[i], E.neg(pts[j])), self.depth)
        return self.minus[(i, j)]


def _pairing_matrix(fh: _FiberHeights, via_difference: bool = False):
    n = len(fh.single)
    G = np.zeros((n, n))
    err = np.zeros((n, n))
    for i in range(n):
        G[i, i] = fh.single[i].value
        err[i, i] = fh.single[i].certified_error
    for i, j in combinations(range(n), 2):
        s = fh.sum_height(i, j)
        if via_difference:
            d = fh.diff_height(i, j)
            G[i, j] = (s.value - d.value) / 4
            err[i, j] = (s.certified_error + d.certified_error) / 4
        else:
            G[i, j] = (s.value - G[i, i] - G[j, j]) / 2
            err[i, j] = (s.certified_error + err[i, i] + err[j, j]) / 2
        G[j, i], err[j, i] = G[i, j], err[i, j]
    return G, err


def gram_and_det(basis: list, t0, y_hints=None, depth: int = FIBER_DEPTH) -> GramRecord:
    """Fiber Neron-Tate Gram matrix of the specialized basis and its determinant."""
    fh = _FiberHeights(fiber_context(basis, t0, y_hints), depth)
    G, err = _pairing_matrix(fh)
    return GramRecord(to_fraction(t0), G, float(np.linalg.det(G)), err)


@dataclass
class FiberHeightReal:
    t0: Fraction
    combination: float
    gram_form: float
    error: float


def fiber_height_real(X: RealPoint, t0, y_hints=None, depth: int = FIBER_DEPTH) -> FiberHeightReal:
    """h_X(t0) by the combination formula and by the Gram form from P_i +- P_j."""
    fh = _FiberHeights(fiber_context(X.basis, t0, y_hints), depth)
    xs = [float(c) for c in X.coeffs]
    total = sum(xs)
    comb = 0.0
    err = 0.0
    for i, h in enumerate(fh.single):
        c = xs[i] * xs[i] - xs[i] * (total - xs[i])
        comb += c * h.value
        err += abs(c) * h.certified_error
    for i, j in combinations(range(len(xs)), 2):
        if xs[i] * xs[j] != 0:
            s = fh.sum_height(i, j)
            comb += xs[i] * xs[j] * s.value
            err += abs(xs[i] * xs[j]) * s.certified_error
    G, gerr = _pairing_matrix(fh, via_difference=True)
    v = np.asarray(xs)
    gram = float(v @ G @ v)
    err2 = float(np.abs(v) @ gerr @ np.abs(v))
    return FiberHeightReal(to_fraction(t0), comb, gram, err + err2)


@dataclass
class RatioRow:
    t: Fraction
    h_naive: float
    h_P: float
    ratio: float
    flags: str = ""


def silverman_ratio_scan(P: Section, t_values, depth: int = FIBER_DEPTH) -> list[RatioRow]:
    """Rows (h(t), h_P(t), h_P(t)/h(t)) sorted by naive height, singular fibers skipped."""
    rows = []
    for t in sorted({to_fraction(v) for v in t_values}):
        try:
            hp = fiber_height(P, t, depth)
        except SingularFiber as exc:
            log.info("skipping t = %s: %s", t, exc)
            continue
        hn = weil_height_rational(t)
        ratio = hp.value / hn if hn > 0 else math.nan
        rows.append(RatioRow(t, hn, hp.value, ratio, "" if hn > 0 else "zero-naive-height"))
    rows.sort(key=lambda r: (r.h_naive, r.t))
    return rows
