"""Random-point audit of the metric-adapted cube partitions.

For each level the cube holding ``x`` must contain the ball of radius
``c1 2^-q`` around its centre and lie within radius ``c2 2^-q`` of it.
"""

import argparse

import numpy as np

from gfl.geometry import build_dyadic_cubes


def audit(alpha, q_max: int, n: int, seed: int) -> None:
    dom = [(1.0, 2.0)] * len(alpha)
    tree = build_dyadic_cubes(dom, alpha, q_max)
    rng = np.random.default_rng(seed)
    x = rng.uniform(1, 2, (n, len(alpha)))
    a = tree.alpha
    inner, outer = np.inf, 0.0
    for q in range(1, q_max + 1):
        idx = tree.locate(q, x)
        lo, hi = tree.bounds(q, idx)
        cen = 0.5 * (lo + hi)
        # Largest centred ball inside the cube and distance of x from the centre.
        inner = min(inner, float(np.min((0.5 * (hi - lo)) ** a) * 2.0**q))
        outer = max(outer, float(np.max(np.sum(np.abs(x - cen) ** a, axis=1)) * 2.0**q))
    print(f"alpha={tuple(alpha)} q<={q_max}: c1={tree.c1:.4g} <= {inner:.4g}, "
          f"max |x - centre| {outer:.4g} <= c2={tree.c2:.4g}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for alpha, q in (((0.5, 0.5), 12), ((0.5, 0.25), 9), ((0.5, 0.5, 0.5), 9)):
        audit(alpha, q, args.points, args.seed)


if __name__ == "__main__":
    main()
