"""Run both visibility-violation experiments on the model domain.

Fits the empirical constants (lambda_zero pipeline, DNT constant, ball-box
constant), then runs the one_eps experiment with them. Everything lands in
``--out``: constants.json plus a report and CSV tables per mode.
"""
import argparse
import json
from pathlib import Path

from kobvis.cli import _print_experiment, _write_experiment, write_json
from kobvis.config import ExperimentConfig
from kobvis.domains import builtin
from kobvis.visibility import fit_constants, visibility_violation_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--domain", default="model_nonpsc")
    ap.add_argument("--eps", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out", default="visibility_runs")
    args = ap.parse_args()
    out = Path(args.out)
    dom = builtin(args.domain)
    cfg = ExperimentConfig(seed=args.seed)

    lam_dir, eps_dir = out / "lambda_zero", out / "one_eps"
    for d in (lam_dir, eps_dir):
        d.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.json", cfg.to_dict())

    consts, report = fit_constants(dom, cfg)
    consts.save(out / "constants.json")
    _write_experiment(report, lam_dir, dom.n)
    print("lambda_zero")
    _print_experiment(report)

    report = visibility_violation_experiment(dom, "one_eps", report.base_point, cfg, consts, eps=args.eps)
    _write_experiment(report, eps_dir, dom.n)
    print("one_eps")
    _print_experiment(report)
    print(json.dumps(consts.to_dict(), indent=2))


if __name__ == "__main__":
    main()
