"""Ball-box scaling of horizontal connections near the non-pseudoconvex point.

For targets at shrinking distance from the origin of the model slice, compare
the horizontal length with ``|p - q| + missing^(1/2)``. A bounded ratio is the
sub-Riemannian estimate the one_eps experiment relies on; a ratio against the
plain chord grows like ``|p - q|^(-1/2)`` for targets in the missing direction.
"""
import argparse

import numpy as np

from kobvis.config import ExperimentConfig
from kobvis.curves import ball_box_scale, horizontal_connect, missing_component, sample_nearby_boundary
from kobvis.domains import builtin
from kobvis.geometry import slice_domain
from kobvis.visibility import canonical_phase, find_nonpsc_point


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--radii", default="0.08,0.04,0.02,0.01,0.005")
    ap.add_argument("--count", type=int, default=6)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()
    cfg = ExperimentConfig()
    model = builtin("model_nonpsc")
    base, spec = find_nonpsc_point(model)
    sl = slice_domain(model, base, canonical_phase(spec.eigenvectors[:, 0]), cfg.slice_radius)
    p = np.zeros(2, dtype=complex)
    print(f"{'radius':>8} {'max l/scale':>12} {'max l/chord':>12} {'max missing':>12}")
    for radius in (float(r) for r in args.radii.split(",")):
        ball_box, chord, miss = [], [], []
        for q in sample_nearby_boundary(sl, p, args.count, radius, args.seed):
            con = horizontal_connect(sl, p, q, budget=cfg.shoot_budget, tol=cfg.shoot_tol,
                                     neighborhood=cfg.neighborhood, seed=args.seed)
            ball_box.append(con.length / ball_box_scale(sl, p, q))
            chord.append(con.length / np.linalg.norm(q - p))
            miss.append(missing_component(sl, p, q))
        print(f"{radius:8.3g} {max(ball_box):12.4f} {max(chord):12.4f} {max(miss):12.3e}")


if __name__ == "__main__":
    main()
