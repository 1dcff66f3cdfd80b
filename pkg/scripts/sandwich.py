"""Compare disc-search upper bounds with closed-form metrics on the model domains.

The polydisc oracle is the unit polydisc, which contains the smoothed one, so
there the ratio may dip below 1. Prints min/median/max of kappa_upper / kappa_exact per domain and writes the
raw samples to a CSV.
"""
import argparse
import csv
import time

import numpy as np

from kobvis.config import DiscSearchConfig
from kobvis.domains import builtin
from kobvis.metric import kappa_exact_ball, kappa_exact_disc, kappa_exact_polydisc, kappa_lower, kappa_upper
from kobvis.polynomial import to_complex

ORACLES = {"disc": kappa_exact_disc, "ball": kappa_exact_ball, "polydisc_smooth": kappa_exact_polydisc}


def interior_points(domain, count, rng):
    out = []
    while len(out) < count:
        z = to_complex(rng.uniform(domain.bbox_min, domain.bbox_max))
        if domain.rho.eval(z) < 0:
            out.append(z)
    return np.array(out)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=100)
    ap.add_argument("--degree", type=int, default=2)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out", default="sandwich.csv")
    args = ap.parse_args()
    cfg = DiscSearchConfig(degree=args.degree)
    rows = []
    for name, exact_fn in ORACLES.items():
        dom = builtin(name)
        rng = np.random.default_rng(args.seed)
        zs = interior_points(dom, args.count, rng)
        vs = rng.standard_normal((args.count, dom.n)) + 1j * rng.standard_normal((args.count, dom.n))
        start = time.perf_counter()
        ratios = []
        for z, v in zip(zs, vs):
            ex = float(exact_fn(z, v))
            up = kappa_upper(dom, z, v, cfg)
            ratios.append(up / ex)
            rows.append([name, float(np.linalg.norm(z)), kappa_lower(dom, z, v), ex, up])
        r = np.array(ratios)
        print(f"{name:>16}: upper/exact min {r.min():.6f} median {np.median(r):.4f} max {r.max():.4f} "
              f"({time.perf_counter() - start:.1f} s)")
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["domain", "abs_z", "kappa_lower", "kappa_exact", "kappa_upper"])
        w.writerows([[r[0], *(repr(float(x)) for x in r[1:])] for r in rows])


if __name__ == "__main__":
    main()
