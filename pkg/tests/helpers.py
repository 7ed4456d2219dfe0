"""Shared data for the test suite: small rational curves with known points."""

from fractions import Fraction

import numpy as np

from heightlab.elliptic_core import CurvePoint, WeierstrassCurve, add_points, mul_point

F = Fraction

# (ainvs, generators); every generator was checked to lie on its curve
CURVES = {
    "37a1": ([0, 0, 1, -1, 0], [(0, 0)]),
    "389a1": ([0, 1, 1, -2, 0], [(-1, 1), (0, 0)]),
    "x3m2": ([0, 0, 0, 0, -2], [(3, 5)]),
    "x3p17": ([0, 0, 0, 0, 17], [(-2, 3), (-1, 4)]),
    "x3p1": ([0, 0, 0, 0, 1], [(2, 3)]),
    "102a1": ([1, 1, 0, -2, 0], [(-1, 2), (2, 2)]),
}


def curve(name):
    return WeierstrassCurve.rational(CURVES[name][0])


def gens(name):
    return [CurvePoint(F(x), F(y)) for x, y in CURVES[name][1]]


def combination(E, gs, coeffs):
    P = CurvePoint.zero()
    for g, c in zip(gs, coeffs):
        P = add_points(E, P, mul_point(E, c, g))
    return P


def random_points(name, count, seed, span=3):
    """Points sum c_i G_i with |c_i| <= span, deterministic in the seed."""
    E, gs = curve(name), gens(name)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        cs = [int(c) for c in rng.integers(-span, span + 1, size=len(gs))]
        out.append(combination(E, gs, cs))
    return out


def associativity_fuzz(triples=1000, names=("37a1", "389a1", "x3m2", "x3p17", "102a1"), seed=0):
    """Count exact associativity failures over random rational triples."""
    failures = 0
    per = triples // len(names)
    for k, name in enumerate(names):
        E = curve(name)
        pts = random_points(name, 3 * per, seed + k, span=2)
        for i in range(per):
            P, Q, R = pts[3 * i: 3 * i + 3]
            lhs = add_points(E, add_points(E, P, Q), R)
            rhs = add_points(E, P, add_points(E, Q, R))
            failures += lhs != rhs
    return failures
