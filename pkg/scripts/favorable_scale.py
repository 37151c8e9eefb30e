"""Required K1 for the favorable-scale event as the base scale r0 shrinks."""

import argparse

from gfl import FieldSpec
from gfl.multipoint import favorable_scale_probe


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    spec = FieldSpec("fbm_sheet", 1, hurst=(0.5,))
    anchors, centers = [[1.2], [1.7]], [[1.3], [1.6]]
    for r0 in (0.1, 0.05, 0.025):
        res = favorable_scale_probe(spec, anchors, centers, r0, reps=args.reps, seed=args.seed)
        print(f"r0={r0}: target {res.target:.3f}, required K1 {res.required_k1:.4f} on {res.n_points} points")


if __name__ == "__main__":
    main()
