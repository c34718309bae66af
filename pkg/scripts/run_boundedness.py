#!/usr/bin/env python3
"""Long-horizon split-step run: stroboscopic H^s norms and the verdict.

Usage: python scripts/run_boundedness.py [--delta 0.1] [--periods 10000]
"""

import argparse
import math
import pathlib

from floquet_lab.evolution import FourierState, evolve


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--delta", type=float, default=0.1)
    ap.add_argument("--periods", type=int, default=10000)
    ap.add_argument("--J", type=int, default=64)
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--s", default="1,2")
    ap.add_argument("--outdir", default="runs/boundedness")
    args = ap.parse_args()
    s_values = tuple(float(x) for x in args.s.split(","))

    outdir = pathlib.Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    u0 = FourierState.power_law(args.p, args.J)
    traj = evolve(u0, args.delta, 2 * math.pi * args.periods, s_values=s_values)
    traj.export_csv(outdir / "norms.csv")

    print(f"l2 drift over {args.periods} periods: {traj.l2_drift:.3e}")
    for s in s_values:
        first, last, ratio = traj.boundedness(s)
        verdict = "BOUNDED" if ratio <= 1.1 else "GROWING"
        print(f"s={s}: first-decade max {first:.6f}, last-decade max {last:.6f}, "
              f"ratio {ratio:.4f} -> {verdict}")
    if traj.flags:
        print("flags:", ", ".join(traj.flags))
    print(f"wrote {outdir}/norms.csv")


if __name__ == "__main__":
    main()
