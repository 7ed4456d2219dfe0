"""Named families and sections used by the experiments and the CLI.

Legendre sections with constant x are x-only over Q(t); each ships with a
cover w -> t on which it becomes a genuine section.  The rank-two fixture puts
x = 2 and x = 3 on one common cover.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from ..elliptic_core import CurvePoint, WeierstrassCurve
from ..exact_arith import RatFunc, parse_rational, parse_ratfunc
from ..function_field import Section, gram_matrix, surface_curve


@dataclass
class CoveredSection:
    """A section over t (possibly x-only) with its genuine lift over a cover w -> t."""

    name: str
    base: Section
    lifted: Section
    cover: RatFunc | None
    cover_degree: int = 1


@dataclass
class CoveredBasis:
    name: str
    base: list
    lifted: list
    cover: RatFunc | None
    cover_degree: int = 1
    _gram: list | None = field(default=None, repr=False)

    @property
    def gram(self) -> list:
        """Exact Neron-Tate Gram matrix over the cover's function field."""
        if self._gram is None:
            self._gram = gram_matrix(self.lifted)
        return self._gram


def legendre() -> WeierstrassCurve:
    t = RatFunc.gen()
    return surface_curve([0, -(1 + t), 0, t, 0])


def legendre_constant_x(c: int, var: str = "w") -> CoveredSection:
    """x = c on y^2 = x(x-1)(x-t); over t = c - w^2 / (c(c-1)) it has y = w."""
    c = Fraction(c)
    base = Section(legendre(), RatFunc.const(c), None, f"x={c}", "t")
    w = RatFunc.gen()
    cover = RatFunc.const(c) - w * w / (c * (c - 1))
    lifted = Section(legendre().map_coefficients(lambda a: _rf(a).compose(cover)),
                     RatFunc.const(c), w, f"x={c}", var)
    return CoveredSection(f"legendre-x{c}", base, lifted, cover, 2)


def legendre_rank2() -> CoveredBasis:
    """x = 2 and x = 3 as genuine sections over one degree-4 cover m -> t."""
    m = RatFunc.gen()
    s = (m * m - 6 * m + 3) / (m * m - 3)
    u = (-3 * m * m + 6 * m - 9) / (m * m - 3)
    cover = 2 - s * s / 2
    E = legendre().map_coefficients(lambda a: _rf(a).compose(cover))
    P2 = Section(E, RatFunc.const(2), s, "P2", "m")
    P3 = Section(E, RatFunc.const(3), u, "P3", "m")
    base = [Section(legendre(), RatFunc.const(c), None, f"P{c}", "t") for c in (2, 3)]
    return CoveredBasis("legendre-rank2", base, [P2, P3], cover, 4)


def legendre_two_torsion() -> CoveredSection:
    P = Section(legendre(), RatFunc.const(0), RatFunc.const(0), "T", "t")
    return CoveredSection("legendre-torsion", P, P, None, 1)


def x3_plus_1_constant() -> CoveredSection:
    """The constant family y^2 = x^3 + 1 with its 6-torsion section (2, 3)."""
    E = surface_curve([0, 0, 0, 0, 1])
    P = Section(E, RatFunc.const(2), RatFunc.const(3), "(2,3)", "t")
    return CoveredSection("x3p1-torsion", P, P, None, 1)


def _rf(a) -> RatFunc:
    return a if isinstance(a, RatFunc) else RatFunc.const(a)


@lru_cache(maxsize=None)
def section_fixture(name: str):
    table = {
        "legendre-x2": lambda: legendre_constant_x(2, "s"),
        "legendre-x3": lambda: legendre_constant_x(3, "u"),
        "legendre-x5": lambda: legendre_constant_x(5, "v"),
        "legendre-torsion": legendre_two_torsion,
        "x3p1-torsion": x3_plus_1_constant,
        "legendre-rank2": legendre_rank2,
    }
    if name not in table:
        raise ValueError(f"unknown section fixture {name!r}; known: {sorted(table)}")
    return table[name]()


# curves over Q ---------------------------------------------------------------------

RATIONAL_CURVES = {
    "37a1": ([0, 0, 1, -1, 0], [(0, 0)]),
    "x3p1": ([0, 0, 0, 0, 1], [(2, 3)]),
}


def rational_curve(name_or_coeffs) -> WeierstrassCurve:
    if isinstance(name_or_coeffs, str):
        if name_or_coeffs not in RATIONAL_CURVES:
            raise ValueError(f"unknown curve {name_or_coeffs!r}")
        return WeierstrassCurve.rational(RATIONAL_CURVES[name_or_coeffs][0])
    if len(name_or_coeffs) != 5:
        raise ValueError("a Weierstrass curve needs five coefficients [a1, a2, a3, a4, a6]")
    return WeierstrassCurve.rational([parse_rational(c) for c in name_or_coeffs])


def rational_point(coords) -> CurvePoint:
    x, y = (parse_rational(c) for c in coords)
    return CurvePoint(x, y)


# custom families from exact literals -------------------------------------------------

def custom_section(coeffs, spec: dict, index: int = 0) -> CoveredSection:
    """A section of y^2 + a1 xy + a3 y = x^3 + ... over Q(t) from literal strings.

    ``spec`` = {"x": ..., "y": optional, "cover": {"var", "t", "y"} optional}.
    """
    E = surface_curve([parse_ratfunc(str(c), "t") for c in coeffs])
    x = parse_ratfunc(str(spec["x"]), "t")
    y = parse_ratfunc(str(spec["y"]), "t") if spec.get("y") is not None else None
    label = spec.get("label", f"S{index}")
    base = Section(E, x, y, label, "t")
    cov = spec.get("cover")
    if cov is None:
        if y is None:
            raise ValueError(f"section {label} is x-only and has no cover")
        return CoveredSection(label, base, base, None, 1)
    var = cov.get("var", "w")
    g = parse_ratfunc(str(cov["t"]), var)
    yw = parse_ratfunc(str(cov["y"]), var)
    lifted = Section(E.map_coefficients(lambda a: _rf(a).compose(g)), x.compose(g), yw, label, var)
    return CoveredSection(label, base, lifted, g, max(g.num.degree(), g.den.degree()))
