"""Residual band bound ratios over the default band plan, written to CSV."""

import argparse

from gfl import FieldSpec
from gfl.bands import band_bound_report


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--hurst", type=float, nargs="+", default=[0.5, 0.5])
    ap.add_argument("--pairs", type=int, default=50)
    ap.add_argument("--out", default="bands.csv")
    args = ap.parse_args()
    spec = FieldSpec("fbm_sheet", len(args.hurst), hurst=tuple(args.hurst))
    base = band_bound_report(spec, pairs_per_band=args.pairs, seed=0)
    fine = band_bound_report(spec, pairs_per_band=2 * args.pairs, seed=1)
    base.to_csv(args.out)
    print(f"c0 = {base.fitted_c0:.4g}, refined {fine.fitted_c0:.4g}, "
          f"ratio {max(base.fitted_c0, fine.fitted_c0) / min(base.fitted_c0, fine.fitted_c0):.3f}")


if __name__ == "__main__":
    main()
