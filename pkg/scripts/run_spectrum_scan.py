#!/usr/bin/env python3
"""Scan the local eigenvalues lambda_j and write the spacing report.

Usage: python scripts/run_spectrum_scan.py [--delta 0.1] [--j-max 30]
"""

import argparse
import pathlib

from floquet_lab import localization
from floquet_lab.feshbach import verify_h1


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--delta", type=float, default=0.1)
    ap.add_argument("--j-max", type=int, default=30)
    ap.add_argument("--outdir", default="runs/spectrum_scan")
    args = ap.parse_args()

    outdir = pathlib.Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    rep = verify_h1(args.delta, 3)
    rep.to_json(outdir / "h1_report.json")
    print(f"gap at 0: {rep.dist_to_nonzero:.6e} "
          f"(delta^2/3 = {args.delta**2 / 3:.6e}), "
          f"multiplicity {rep.zero_multiplicity}")

    scan = localization.local_spectrum_scan(args.delta, args.j_max)
    scan.export_csv(outdir / "eigenvalues.csv")
    for j in sorted(k for k in scan.local_pairs if k > 0):
        lam = scan.local_pairs[j].E
        print(f"j={j:3d}  lambda={lam:+.6e}  lambda*j^2/delta^2={lam * j * j / args.delta**2:+.4f}")

    spacing = localization.spacing_report(args.delta, args.j_max, scan=scan)
    spacing.to_json(outdir / "spacing.json")
    print(f"min scaled gap: {spacing.min_gap_scaled:.3f} (want >= 1)")
    print(f"wrote {outdir}/")


if __name__ == "__main__":
    main()
