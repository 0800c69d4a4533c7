"""Volumetric sweep of CNOT-grid patterns under a calibrated depolarizing model.

Writes one CSV row per (noise, n, m) cell with mean and worst-case test
failure and incorrect output rates over random-input circuits.

    python scripts/volumetric_sweep.py --n 2,3,4 --m 1,2,3 --noise 0.01,0.02 --out sweep.csv
"""

from __future__ import annotations

import argparse
import csv

from mbqc_verify.cli import CELL_COLUMNS, RunConfig, cnot_grid_cells


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", default="2,3,4")
    ap.add_argument("--m", default="1,2,3")
    ap.add_argument("--noise", default="0.005,0.01,0.02", help="two-qubit depolarizing strengths")
    ap.add_argument("--circuits", type=int, default=5)
    ap.add_argument("--rounds", type=int, default=500, help="computation rounds (= test rounds) per circuit")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="volumetric_sweep.csv")
    args = ap.parse_args()

    ns = [int(v) for v in args.n.split(",")]
    ms = [int(v) for v in args.m.split(",")]
    with open(args.out, "w", newline="") as fh:
        wr = csv.DictWriter(fh, ["depol2"] + CELL_COLUMNS, lineterminator="\n")
        wr.writeheader()
        for p in (float(v) for v in args.noise.split(",")):
            cfg = RunConfig(
                d=args.rounds,
                t=args.rounds,
                w=1,
                noise=f"depol1={p / 10},depol2={p},measflip={p / 3}",
                seed=args.seed,
                workers=args.workers,
            )
            for row in cnot_grid_cells(cfg, ns, ms, args.circuits):
                wr.writerow({"depol2": p, **row})
                print(f"p={p} n={row['n']} m={row['m']} test={row['test_failure_mean']:.3f} "
                      f"incorrect={row['incorrect_output_mean']:.3f}", flush=True)


if __name__ == "__main__":
    main()
