"""Command-line front end.

Every command resolves its configuration, validates paths, writes
``manifest.json`` and only then computes and writes result files. Exit codes:
0 success, 2 usage or input error, 3 numerical failure, 4 precondition refusal.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import DiscSearchConfig, ExperimentConfig, GraphConfig
from .curves import offset_curve, tangential_curve_with_chord_arc, chord_arc_ratio
from .distance import kobayashi_distance_upper
from .domains import BUILTINS, load_domain
from .errors import KobvisError
from .geometry import boundary_project, sample_boundary, slice_domain, tangent_levi_spectrum
from .metric import (
    EXACT,
    dnt_bound,
    disc_search_provider,
    exact_provider,
    kobayashi_distance_lower,
    kappa_lower,
    search_disc,
)
from .visibility import FittedConstants, canonical_phase, find_nonpsc_point, fit_constants, \
    visibility_violation_experiment

EXACT_KIND = {"ball": "exact_ball", "ball3": "exact_ball", "disc": "exact_disc"}


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header: list, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"cannot serialise {type(x)}")


def parse_vector(text: str) -> np.ndarray:
    """Comma-separated complex numbers, e.g. ``0.5,0`` or ``0.1+0.2j,1``."""
    try:
        return np.array([complex(s.strip().replace("i", "j")) for s in text.split(",")], dtype=complex)
    except ValueError as exc:
        raise UsageError(f"cannot parse complex vector {text!r}") from exc


def parse_floats(text: str) -> tuple:
    try:
        return tuple(float(s) for s in text.split(","))
    except ValueError as exc:
        raise UsageError(f"cannot parse list of reals {text!r}") from exc


def coord_header(n: int) -> list:
    return [f"z{j + 1}_{part}" for j in range(n) for part in ("re", "im")]


def coord_values(z) -> list:
    return [x for c in z for x in (float(c.real), float(c.imag))]


def _vec_text(z) -> str:
    parts = []
    for c in np.asarray(z, dtype=complex):
        re, im = float(c.real), float(c.imag)
        parts.append(f"{re!r}{'-' if np.signbit(im) else '+'}{abs(im)!r}j")
    return ";".join(parts)


# ---------------------------------------------------------------- commands


def cmd_classify(args, domain, out: Path) -> dict:
    pts = sample_boundary(domain, args.count, args.seed)
    rows, counts = [], {}
    for k, p in enumerate(pts):
        spec = tangent_levi_spectrum(domain, p)
        counts[spec.classification] = counts.get(spec.classification, 0) + 1
        rows.append([k, *coord_values(p), float(spec.eigenvalues[0]), spec.classification])
    write_csv(out / "classify.csv", ["index", *coord_header(domain.n), "min_eigenvalue", "class"], rows)
    eig = [r[-2] for r in rows]
    print(f"{len(rows)} boundary points on {domain.name}: "
          + ", ".join(f"{v} {k}" for k, v in sorted(counts.items()))
          + f"; smallest eigenvalue {min(eig):.6g}")
    return {"counts": counts, "min_eigenvalue": min(eig)}


def _disc_config(args) -> DiscSearchConfig:
    return DiscSearchConfig(degree=getattr(args, "degree", 2), budget=getattr(args, "budget", None))


def cmd_metric(args, domain, out: Path, constants) -> dict:
    z, v = parse_vector(args.z), parse_vector(args.v)
    if z.size != domain.n or v.size != domain.n:
        raise UsageError(f"--z and --v need {domain.n} components")
    res = search_disc(domain, z, v, _disc_config(args))
    kind = EXACT_KIND.get(domain.name)
    exact = float(EXACT[kind](z, v)) if kind else None
    rec = {
        "domain": domain.name, "z": _vec_text(z), "v": _vec_text(v), "kappa_upper": res.kappa,
        "kappa_lower": kappa_lower(domain, z, v), "exact": exact,
        "disc_quad_coeff": _vec_text(res.quad) if len(res.coeffs) else "", "radius": res.radius,
    }
    header = ["domain", "z", "v", "kappa_upper", "kappa_lower", "exact", "disc_quad_coeff", "radius"]
    write_csv(out / "metric.csv", header, [[("" if rec[h] is None else rec[h]) for h in header]])
    if constants is not None:
        try:
            rec["dnt_bound"] = dnt_bound(domain, z, v, constants.c_l)
        except KobvisError as exc:
            rec["dnt_bound"] = None
            rec["dnt_note"] = str(exc)
    write_json(out / "metric.json", rec)
    line = f"kappa_upper={res.kappa:.10g} kappa_lower={rec['kappa_lower']:.10g}"
    if exact is not None:
        line += f" exact={exact:.10g}"
    if rec.get("dnt_bound") is not None:
        line += f" dnt_bound={rec['dnt_bound']:.10g} (fitted C_L={constants.c_l:.6g})"
    print(line)
    return rec


def cmd_distance(args, domain, out: Path) -> dict:
    z, w = parse_vector(args.z), parse_vector(args.w)
    if z.size != domain.n or w.size != domain.n:
        raise UsageError(f"--z and --w need {domain.n} components")
    kind = args.provider
    if kind == "exact":
        if domain.name not in EXACT_KIND:
            raise UsageError(f"no exact metric for {domain.name}; use --provider disc_search")
        provider = exact_provider(EXACT_KIND[domain.name], domain)
    else:
        provider = disc_search_provider(domain, _disc_config(args))
    cfg = GraphConfig(samples=args.samples, seed=args.seed)
    upper, path = kobayashi_distance_upper(provider, domain, z, w, cfg, return_path=True)
    lower = kobayashi_distance_lower(domain, z, w)
    write_csv(out / "path.csv", ["index", *coord_header(domain.n)],
              [[k, *coord_values(p)] for k, p in enumerate(path)])
    rec = {"domain": domain.name, "provider": provider.kind, "z": _vec_text(z), "w": _vec_text(w),
           "upper": upper, "lower": lower, "path_nodes": len(path)}
    write_json(out / "distance.json", rec)
    print(f"{lower:.10g} <= k(z, w) <= {upper:.10g}  ({provider.kind}, {len(path)} path nodes)")
    return rec


def _experiment_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig(seed=args.seed, disc=_disc_config(args))
    changes = {}
    if args.eta_grid:
        changes["eta_grid"] = parse_floats(args.eta_grid)
    for name in ("s", "h", "arc_points", "nodes_per_interval", "slice_radius"):
        val = getattr(args, name, None)
        if val is not None:
            changes[name] = val
    return replace(cfg, **changes)


def cmd_curve(args, domain, out: Path) -> dict:
    cfg = _experiment_config(args)
    p, spec = find_nonpsc_point(domain, parse_vector(args.base_point) if args.base_point else None, seed=cfg.seed)
    v = canonical_phase(spec.eigenvectors[:, 0])
    sl = slice_domain(domain, p, v, cfg.slice_radius)
    base = tangential_curve_with_chord_arc(sl, np.zeros(2, complex), cfg.s, cfg.h, cfg.eps_chord,
                                           cfg.max_halvings, cfg.neighborhood)
    rows = []
    for t, z in zip(base.t, base.nodes):
        rows.append([0.0, float(t), *coord_values(sl.origin + sl.frame @ z), 0.0])
    for eta in cfg.eta_grid:
        off = offset_curve(base, eta)
        for t, z in zip(off.curve.t, off.nodes):
            amb = sl.origin + sl.frame @ z
            rows.append([float(eta), float(t), *coord_values(amb), boundary_project(domain, amb)[1]])
    write_csv(out / "curve_nodes.csv", ["eta", "t", *coord_header(domain.n), "delta"], rows)
    rec = {"base_point": p, "direction": v, "length": base.length, "nodes": len(base.t),
           "chord_arc": chord_arc_ratio(base), "max_rho": float(base.rho_residual.max()),
           "max_horizontality": float(base.horizontality.max())}
    write_json(out / "curve.json", rec)
    print(f"integral curve of length {base.length:.6g} with {len(base.t)} nodes; chord-arc {rec['chord_arc']:.6f}")
    return rec


def _write_experiment(report, out: Path, n: int) -> None:
    write_json(out / "report.json", report.summary())
    arc_cols = ["eta", "t1", "t2", "chord", "l_e", "l_kappa_upper", "k_lower", "k_upper", "ratio"]
    write_csv(out / "arcs.csv", arc_cols, [[r[c] for c in arc_cols] for r in report.arcs])
    write_csv(out / "curve_nodes.csv", ["eta", "t", *coord_header(n), "delta"],
              [[r["eta"], r["t"], *coord_values(r["z"]), r["delta"]] for r in report.nodes])


def _print_experiment(report) -> None:
    print(f"{'eta':>8} {'lambda_hat':>11} {'eps_hat':>9} {'C1':>7} {'max_delta/eta':>13}")
    for r in report.per_eta:
        print(f"{r['eta']:8.1e} {r['lambda_hat']:11.5f} {r['eps_hat']:9.5f} {r['c1']:7.4f} "
              f"{r['max_delta'] / r['eta']:13.6f}")
    print(report.verdict["text"])


def cmd_visibility(args, domain, out: Path, constants) -> dict:
    cfg = _experiment_config(args)
    p = parse_vector(args.base_point) if args.base_point else None
    report = visibility_violation_experiment(domain, args.mode, p, cfg, constants, args.lam, args.eps)
    _write_experiment(report, out, domain.n)
    _print_experiment(report)
    return report.verdict


def cmd_fit_constants(args, domain, out: Path) -> dict:
    cfg = _experiment_config(args)
    p = parse_vector(args.base_point) if args.base_point else None
    consts, report = fit_constants(domain, cfg, p, connect_samples=args.connect_samples)
    consts.save(out / "constants.json")
    _write_experiment(report, out, domain.n)
    for k, v in consts.to_dict().items():
        print(f"{k:>15}: {v}")
    return consts.to_dict()


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kobvis", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, disc=True):
        p.add_argument("--domain", required=True, help=f"builtin ({', '.join(BUILTINS)}) or JSON file")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--out", default="kobvis_out", help="output directory")
        if disc:
            p.add_argument("--degree", type=int, default=2, help="highest power in the disc family")
            p.add_argument("--budget", type=int, help="disc search grid checks (default 50 per real parameter)")

    def experiment(p):
        p.add_argument("--base-point", help="non-pseudoconvex boundary point (default: discovered)")
        p.add_argument("--eta-grid", help="comma-separated offsets")
        p.add_argument("--s", type=float)
        p.add_argument("--h", type=float)
        p.add_argument("--arc-points", type=int)
        p.add_argument("--nodes-per-interval", type=int)
        p.add_argument("--slice-radius", type=float)

    p = sub.add_parser("classify", help="Levi classification of boundary samples")
    common(p, disc=False)
    p.add_argument("-n", "--count", type=int, default=100)

    p = sub.add_parser("metric", help="bounds for the Kobayashi-Royden metric at (z, v)")
    common(p)
    p.add_argument("--z", required=True)
    p.add_argument("--v", required=True)
    p.add_argument("--constants", help="constants.json with a fitted C_L")

    p = sub.add_parser("distance", help="bounds for the Kobayashi distance")
    common(p)
    p.add_argument("--z", required=True)
    p.add_argument("--w", required=True)
    p.add_argument("--provider", choices=("exact", "disc_search"), default="exact")
    p.add_argument("--samples", type=int, default=4096)

    p = sub.add_parser("curve", help="tangential boundary curve and its offsets")
    common(p, disc=False)
    experiment(p)

    p = sub.add_parser("visibility", help="visibility-violation experiment")
    common(p)
    experiment(p)
    p.add_argument("--mode", choices=("lambda_zero", "one_eps"), default="lambda_zero")
    p.add_argument("--lambda", dest="lam", type=float, help="level lambda (default 1.1 max lambda_hat)")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--constants", help="constants.json from fit-constants (default OUT/constants.json)")

    p = sub.add_parser("fit-constants", help="measure the empirical constants on a domain")
    common(p)
    experiment(p)
    p.add_argument("--connect-samples", type=int, default=10)
    return ap


def _resolved(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items())}


def run(args) -> int:
    domain_src = args.domain
    if domain_src not in BUILTINS and not Path(domain_src).is_file():
        raise UsageError(f"no builtin or file named {domain_src!r}")
    out = Path(args.out)
    if out.exists() and not out.is_dir():
        raise UsageError(f"output path {out} is not a directory")
    constants = None
    const_path = getattr(args, "constants", None)
    if args.command == "visibility" and const_path is None and (out / "constants.json").is_file():
        const_path = str(out / "constants.json")
    if const_path:
        constants = FittedConstants.load(const_path)
    try:
        domain = load_domain(domain_src)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot load domain {domain_src!r}: {exc}") from exc
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"tool": "kobvis", "version": __version__, "command": args.command, "config": _resolved(args),
                "domain": {"name": domain.name, "collar_eta0": domain.collar_eta0, "diameter": domain.diameter},
                "constants": None if constants is None else constants.to_dict()}
    if args.command in ("visibility", "fit-constants", "curve"):
        manifest["experiment"] = _experiment_config(args).to_dict()
    write_json(out / "manifest.json", manifest)
    if args.command == "classify":
        cmd_classify(args, domain, out)
    elif args.command == "metric":
        cmd_metric(args, domain, out, constants)
    elif args.command == "distance":
        cmd_distance(args, domain, out)
    elif args.command == "curve":
        cmd_curve(args, domain, out)
    elif args.command == "visibility":
        cmd_visibility(args, domain, out, constants)
    elif args.command == "fit-constants":
        cmd_fit_constants(args, domain, out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except UsageError as exc:
        print(f"kobvis: error: {exc}", file=sys.stderr)
        return 2
    except KobvisError as exc:
        print(f"kobvis: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"kobvis: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
