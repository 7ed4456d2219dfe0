"""heightlab: command-line front end.

    heightlab <subcommand> --config path [--out dir] [--threads n] [--seed s]

Exit status: 0 on success, 2 for invalid input (config, literals, windows,
missing output directory), 3 when a computation fails.
"""

from __future__ import annotations

import argparse
import ast
import json
import logging
import math
import operator
import sys
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np

from .betti import check_rect, density_grid
from .exact_arith import format_exact, parse_rational
from .function_field import (RealPoint, divisor_of_section, geometric_height_oracle, regulator,
                             section_height)
from .heights_q import canonical_height, canonical_height_oracle
from .lab import artifacts
from .lab.experiments import (DEFAULT_COMBOS, equidist_experiment, essential_min_scan,
                              rankdrop_scan)
from .lab.fixtures import (CoveredBasis, CoveredSection, RATIONAL_CURVES, custom_section,
                           rational_curve, rational_point, section_fixture)
from .specialization import fiber_context, fiber_height_real, gram_and_det, point_height
from .torsion_search import (HIT_COLUMNS, Combination, _cover_values, _lift,
                             fibonacci_approximants, find_torsion_params, small_sequence)

log = logging.getLogger("heightlab")

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 2, 3


class ConfigError(ValueError):
    pass


# config helpers -----------------------------------------------------------------------

_REAL_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
             ast.Div: operator.truediv, ast.Pow: operator.pow}
_REAL_NAMES = {"pi": math.pi, "phi": (1 + math.sqrt(5)) / 2, "golden": (1 + math.sqrt(5)) / 2}


def parse_real(v) -> float:
    """A real coefficient: a number or an expression like "(1+sqrt(5))/2"."""
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    if not isinstance(v, str):
        raise ConfigError(f"not a real number: {v!r}")

    def ev(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _REAL_OPS:
            return _REAL_OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            return -ev(node.operand) if isinstance(node.op, ast.USub) else ev(node.operand)
        if isinstance(node, ast.Name) and node.id in _REAL_NAMES:
            return _REAL_NAMES[node.id]
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id == "sqrt"
                and len(node.args) == 1):
            return math.sqrt(ev(node.args[0]))
        raise ConfigError(f"malformed real literal {v!r}")

    try:
        return ev(ast.parse(v.replace("^", "**"), mode="eval").body)
    except (SyntaxError, OverflowError, ZeroDivisionError) as exc:
        raise ConfigError(f"malformed real literal {v!r}") from exc


def _params(cfg: dict) -> dict:
    return cfg.get("params", {})


def _window(p: dict, key: str = "window", default=(1.05, 5.0, -1.0, 1.0)):
    w = p.get(key, default)
    if len(w) != 4:
        raise ConfigError(f"{key} must be [re_min, re_max, im_min, im_max]")
    return tuple(float(parse_rational(v)) if isinstance(v, str) else float(v) for v in w)


def _family_coeffs(cfg: dict):
    fam = cfg.get("family", "legendre")
    if fam == "legendre":
        return ["0", "-(1+t)", "0", "t", "0"]
    if isinstance(fam, dict) and "coeffs" in fam:
        return fam["coeffs"]
    raise ConfigError(f"unknown family {fam!r}")


def load_sections(cfg: dict) -> list[CoveredSection]:
    specs = cfg.get("sections")
    if not specs:
        raise ConfigError("config needs a non-empty 'sections' list")
    out = []
    for i, s in enumerate(specs):
        if isinstance(s, str):
            fx = section_fixture(s)
            if isinstance(fx, CoveredBasis):
                raise ConfigError(f"{s} is a basis; use the 'basis' key")
            out.append(fx)
        else:
            out.append(custom_section(_family_coeffs(cfg), s, i))
    return out


def load_basis(cfg: dict) -> CoveredBasis:
    name = cfg.get("basis")
    if name is None:
        secs = load_sections(cfg)
        covers = {format_exact(s.cover, "w") if s.cover is not None else None for s in secs}
        if len(covers) != 1:
            raise ConfigError("basis sections must share one cover")
        return CoveredBasis("custom", [s.base for s in secs], [s.lifted for s in secs],
                            secs[0].cover, secs[0].cover_degree)
    fx = section_fixture(name)
    if not isinstance(fx, CoveredBasis):
        raise ConfigError(f"{name} is not a basis fixture")
    return fx


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    artifacts.validate_json(cfg, "config")
    return cfg


# subcommands -------------------------------------------------------------------------------
# each returns a list of written paths

def cmd_height(cfg, out: Path, prov, threads):
    curve = cfg.get("curve")
    if curve is None:
        raise ConfigError("height needs 'curve' (a name or five coefficients)")
    E = rational_curve(curve)
    pt = cfg.get("point")
    if pt is None:
        if not isinstance(curve, str):
            raise ConfigError("height needs 'point' for a custom curve")
        pt = RATIONAL_CURVES[curve][1][0]
    P = rational_point(pt)
    if not E.contains(P):
        raise ConfigError(f"point {pt} is not on the curve")
    depth = int(_params(cfg).get("depth", 10))
    h = canonical_height(E, P, depth)
    o = canonical_height_oracle(E, P.x, depth)
    obj = {"command": "height", "curve": [format_exact(a) for a in E.ainvs],
           "point": [format_exact(P.x), format_exact(P.y)], "height": h.to_json(),
           "oracle": o.to_json(), "depth": depth,
           "agreement": abs(h.value - o.value)}
    return [artifacts.write_json(out / "height.json", obj, prov, "height")]


def cmd_ff_height(cfg, out, prov, threads):
    S = load_sections(cfg)[0]
    depth = int(_params(cfg).get("depth", 4))
    g = geometric_height_oracle(S.base, depth)
    obj = {"command": "ff-height", "section": S.name,
           "height": format_exact(g.value) if g.exact else float(g.value),
           "exact": g.exact, "method": "doubling-degree-oracle", "depth": g.depth,
           "error": g.error, "trail": [format_exact(v) for v in g.trail]}
    try:
        obj["divisor_degree"] = format_exact(section_height(S.base))
    except ArithmeticError as exc:
        log.info("no divisor degree: %s", exc)
    return [artifacts.write_json(out / "ff_height.json", obj, prov, "ff_height")]


def cmd_divisor(cfg, out, prov, threads):
    S = load_sections(cfg)[0]
    D = divisor_of_section(S.base)
    obj = {"command": "divisor", "section": S.name, "divisor": D.to_json()}
    return [artifacts.write_json(out / "divisor.json", obj, prov, "divisor")]


def _y_hints(secs, t0, p):
    """Square-root branches from each lifted section over a preimage of t0.

    The preimage nearest params.w_near (default: largest real part, then
    imaginary part) fixes the branch; this also fixes the signs of pairings.
    """
    hints, ws = [], []
    for s in secs:
        if s.cover is None:
            hints.append(None)
            ws.append(complex(t0))
            continue
        pre = _lift(s.cover, np.array([complex(t0)]))
        if "w_near" in p:
            w = pre[np.argmin(np.abs(pre - complex(parse_real(p["w_near"]))))]
        else:
            w = max(pre, key=lambda v: (round(v.real, 12), v.imag))
        hints.append(complex(_cover_values(s.lifted.y, w)))
        ws.append(complex(w))
    return hints, ws


def _alg_json(a):
    return format_exact(a.as_fraction()) if a.is_rational() else a.to_json()


def cmd_specialize(cfg, out, prov, threads):
    p = _params(cfg)
    if "t0" not in p:
        raise ConfigError("specialize needs params.t0")
    t0 = parse_rational(p["t0"])
    secs = load_sections(cfg)
    hints, ws = _y_hints(secs, t0, p)
    base = [s.base for s in secs]
    ctx = fiber_context(base, t0, hints)
    pts = []
    for s, pt in zip(secs, ctx.points):
        h = point_height(ctx.curve, pt)
        pts.append({"section": s.name,
                    "x": None if pt.is_zero else _alg_json(pt.x),
                    "y": None if pt.is_zero else _alg_json(pt.y),
                    "height": h.value, "error": h.certified_error})
    obj = {"command": "specialize", "t0": format_exact(t0),
           "curve": [format_exact(a) for a in ctx.curve.ainvs], "points": pts,
           "cover_points": [[w.real, w.imag] for w in ws]}
    if len(secs) > 1:
        g = gram_and_det(base, t0, hints)
        obj["gram"] = g.to_json()
        if "coeffs" in p:
            X = RealPoint(base, [parse_real(c) for c in p["coeffs"]], gram=np.array(g.matrix))
            r = fiber_height_real(X, t0, hints)
            obj["h_X"] = {"combination": r.combination, "gram_form": r.gram_form, "error": r.error}
    return [artifacts.write_json(out / "specialize.json", obj, prov, "specialize")]


def _real_point(cfg, basis_secs, p, key="coeffs"):
    coeffs = [parse_real(c) for c in p.get(key, [1] * len(basis_secs))]
    if len(coeffs) != len(basis_secs):
        raise ConfigError(f"{key} needs one entry per section")
    G = artifacts_gram(basis_secs)
    return RealPoint(basis_secs, coeffs, gram=G)


def artifacts_gram(sections):
    from .function_field import gram_matrix
    return [[float(v) for v in row] for row in gram_matrix(sections)]


def cmd_betti(cfg, out, prov, threads):
    p = _params(cfg)
    basis = load_basis(cfg) if cfg.get("basis") else None
    lifted = basis.lifted if basis else [s.lifted for s in load_sections(cfg)]
    rect = _window(p, "rect", None) if "rect" in p else None
    if rect is None:
        raise ConfigError("betti needs params.rect in the base coordinate of the sections")
    n = int(p.get("n", 20))
    check_rect(rect, lifted[0].curve)
    X = _real_point(cfg, lifted, p)
    grid = density_grid(X, rect, n, combination=len(lifted) > 1)
    comb = grid.rho_combination if grid.rho_combination is not None else np.full(grid.rho.shape, np.nan)
    rows = []
    for w, rho, rc, ok in zip(grid.params.ravel(), grid.rho.ravel(), comb.ravel(), grid.valid.ravel()):
        rows.append({"re_w": float(w.real), "im_w": float(w.imag),
                     "rho": float(rho) if ok else None,
                     "rho_combination": float(rc) if np.isfinite(rc) else None, "valid": int(ok)})
    paths = [artifacts.write_csv(out / "density.csv",
                                 ["re_w", "im_w", "rho", "rho_combination", "valid"],
                                 rows, prov, "density")]
    rel = None
    if grid.rho_combination is not None:
        a, b = grid.rho[grid.valid], grid.rho_combination[grid.valid]
        rel = float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300))) if a.size else None
    meta = {"command": "betti", "rect": list(rect), "n": n, "coeffs": [float(c) for c in X.coeffs],
            "mass": grid.mass(), "valid_fraction": float(grid.valid.mean()),
            "max_relative_route_difference": rel}
    paths.append(artifacts.write_json(out / "betti.json", meta, prov, "betti"))
    return paths


def _orders(p):
    N = p.get("N", 2)
    return [int(v) for v in (N if isinstance(N, list) else [N])]


def cmd_torsion(cfg, out, prov, threads):
    p = _params(cfg)
    secs = load_sections(cfg)
    covers = {id(s.cover) for s in secs}
    if len(secs) > 1 and len(covers) != 1:
        raise ConfigError("torsion combinations need sections over one cover")
    coeffs = [int(c) for c in p.get("coeffs", [1] * len(secs))]
    comb = Combination([s.lifted for s in secs], coeffs)
    window = _window(p)
    rows = []
    for N in _orders(p):
        for h in find_torsion_params(comb, N, window, seeds=int(p.get("seeds", 32)),
                                     cover=secs[0].cover):
            rows.append(h.to_row())
    return [artifacts.write_csv(out / "torsion_hits.csv", HIT_COLUMNS, rows, prov, "torsion_hits")]


def _approximants(p, dim):
    spec = p.get("approximants", "fibonacci")
    if spec == "fibonacci":
        return fibonacci_approximants(int(p.get("count", 8)), int(p.get("start", 1)))
    if spec == "multiples":
        return [((n,) + (0,) * (dim - 1), n) for n in range(1, int(p.get("count", 4)) + 1)]
    try:
        return [(tuple(int(v) for v in a), int(M)) for a, M in spec]
    except (TypeError, ValueError) as exc:
        raise ConfigError("approximants must be 'fibonacci', 'multiples' or [[a...], M] pairs") from exc


SMALLSEQ_COLUMNS = ["n", "coeffs", "scale", "N", "re_t", "im_t", "rational_t", "h_X", "method"]


def cmd_smallseq(cfg, out, prov, threads):
    p = _params(cfg)
    basis = load_basis(cfg)
    X = RealPoint(basis.lifted, [parse_real(c) for c in p.get("coeffs", [1] * len(basis.lifted))],
                  gram=[[float(v) for v in r] for r in basis.gram])
    approx = _approximants(p, len(basis.lifted))
    rows = small_sequence(X, approx, _window(p), cover=basis.cover, base_sections=basis.base,
                          N_budget=tuple(p.get("N_budget", (2, 3, 4, 5, 6, 8))),
                          seeds=int(p.get("seeds", 16)))
    recs = [{"n": r.n, "coeffs": " ".join(str(a) for a in r.coeffs), "scale": r.scale, "N": r.N,
             "re_t": None if r.t is None else r.t.real, "im_t": None if r.t is None else r.t.imag,
             "rational_t": None if r.rational_t is None else format_exact(r.rational_t),
             "h_X": r.h_X, "method": r.method} for r in rows]
    return [artifacts.write_csv(out / "smallseq.csv", SMALLSEQ_COLUMNS, recs, prov, "smallseq")]


def cmd_equidist(cfg, out, prov, threads):
    p = _params(cfg)
    S = load_sections(cfg)[0]
    rep = equidist_experiment(S, Ns=p.get("Ns", (6, 12, 24)), window=_window(p),
                              partition=int(p.get("partition", 10)), grid_n=int(p.get("grid_n", 200)),
                              seeds=int(p.get("seeds", 32)), threads=threads)
    rep["command"] = "equidist"
    return [artifacts.write_json(out / "equidist.json", rep, prov, "equidist")]


RANKDROP_COLUMNS = ["a1", "a2", "N", "re_t", "im_t", "rational_t", "h_P1", "h_P2", "sum", "method"]


def cmd_rankdrop(cfg, out, prov, threads):
    p = _params(cfg)
    basis = load_basis(cfg)
    combos = [tuple(int(v) for v in c) for c in p.get("combos", DEFAULT_COMBOS)]
    rep = rankdrop_scan(basis, combos, Ns=p.get("Ns", (2, 3, 4)), window=_window(p),
                        seeds=int(p.get("seeds", 16)), threads=threads)
    rep["command"] = "rankdrop"
    recs = [{"a1": r["combo"][0], "a2": r["combo"][1], "N": r["N"], "re_t": r["t"][0],
             "im_t": r["t"][1], "rational_t": r["rational_t"], "h_P1": r["h_P2"], "h_P2": r["h_P3"],
             "sum": r["sum"], "method": r["method"]} for r in rep["rows"]]
    return [artifacts.write_json(out / "rankdrop.json", rep, prov, "rankdrop"),
            artifacts.write_csv(out / "rankdrop.csv", RANKDROP_COLUMNS, recs, prov, "rankdrop_rows")]


def cmd_regulator(cfg, out, prov, threads):
    p = _params(cfg)
    basis = load_basis(cfg)
    if "X" not in p or "Y" not in p:
        raise ConfigError("regulator needs params.X and params.Y coefficient lists")
    G = basis.gram
    Gf = [[float(v) for v in r] for r in G]
    X = RealPoint(basis.lifted, [parse_real(c) for c in p["X"]], gram=Gf)
    Y = X.with_coeffs([parse_real(c) for c in p["Y"]])
    obj = {"command": "regulator", "basis": basis.name, "gram": [[format_exact(v) for v in r] for r in G],
           "X": [float(c) for c in X.coeffs], "Y": [float(c) for c in Y.coeffs],
           "regulator": regulator(X, Y)}
    if all(isinstance(c, int) or (isinstance(c, str) and _is_rational_literal(c)) for c in p["X"] + p["Y"]):
        x = [parse_rational(str(c)) for c in p["X"]]
        y = [parse_rational(str(c)) for c in p["Y"]]
        n = len(x)

        def form(a, b):
            return sum(a[i] * b[j] * G[i][j] for i in range(n) for j in range(n))

        obj["regulator_exact"] = format_exact(form(x, x) * form(y, y) - form(x, y) ** 2)
    return [artifacts.write_json(out / "regulator.json", obj, prov, "regulator")]


def _is_rational_literal(s: str) -> bool:
    try:
        parse_rational(s)
        return True
    except (ValueError, ZeroDivisionError):
        return False


def cmd_essmin(cfg, out, prov, threads):
    p = _params(cfg)
    basis = load_basis(cfg)
    X = RealPoint(basis.lifted, [parse_real(c) for c in p.get("coeffs", [1] * len(basis.lifted))],
                  gram=[[float(v) for v in r] for r in basis.gram])
    approx = _approximants(p, len(basis.lifted)) if p.get("approximants") else []
    rep = essential_min_scan(X, budget=int(p.get("budget", 0)), approximants=approx,
                             window=_window(p), cover=basis.cover, base_sections=basis.base,
                             height_bound=int(p.get("height_bound", 12)), seed=prov["seed"])
    rep["command"] = "essmin"
    return [artifacts.write_json(out / "essmin.json", rep, prov, "essmin")]


COMMANDS = {
    "height": cmd_height, "ff-height": cmd_ff_height, "divisor": cmd_divisor,
    "specialize": cmd_specialize, "betti": cmd_betti, "torsion": cmd_torsion,
    "smallseq": cmd_smallseq, "equidist": cmd_equidist, "rankdrop": cmd_rankdrop,
    "regulator": cmd_regulator, "essmin": cmd_essmin,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="heightlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", default=".", help="existing output directory")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        if not out.is_dir():
            raise ConfigError(f"output directory does not exist: {out}")
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        prov = artifacts.provenance(cfg, seed)
        with np.errstate(all="ignore"):
            paths = COMMANDS[args.command](cfg, out, prov, args.threads)
    except (ValueError, KeyError, TypeError, jsonschema.ValidationError) as exc:
        print(f"heightlab {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ArithmeticError, RuntimeError, FloatingPointError) as exc:
        print(f"heightlab {args.command}: computation failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    for path in paths:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
