"""Anti-concentration exponents of the conditional field against (m - 1) d."""

import argparse

from gfl import FieldSpec
from gfl.verifier import check_anticoncentration

ANCHORS = [[1.2], [1.5], [1.8]]
POINTS = [[1.22], [1.48], [1.83]]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    spec = FieldSpec("fbm_sheet", 1, hurst=(0.5,))
    for m, d in ((2, 1), (2, 2), (2, 3), (3, 1)):
        rep = check_anticoncentration(spec, ANCHORS, POINTS[:m], reps=args.reps, seed=args.seed, d=d)
        print(f"m={m} d={d}: slope {rep.slope:.3f}, expected {rep.expected}, pass={rep.passed}")


if __name__ == "__main__":
    main()
