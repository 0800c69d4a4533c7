"""Grover verification across marked items and two-qubit noise strengths.

For each (tau, p) the protocol runs ``d = t`` rounds and the bootstrap
statistics of both rates are written to CSV, next to the 25% tolerance bar.

    python scripts/grover_noise_scan.py --noise 0,0.01,0.02,0.05 --rounds 500
"""

from __future__ import annotations

import argparse
import csv

from mbqc_verify.cli import parse_noise
from mbqc_verify.pattern import grover_expected, grover_pattern
from mbqc_verify.protocol import ProtocolParams, run_protocol, threshold_bound

COLUMNS = [
    "tau",
    "depol2",
    "decision",
    "c_fail",
    "test_failure_rate",
    "incorrect_output_rate",
    "test_failure_boot_mean",
    "test_failure_boot_std",
    "incorrect_output_boot_mean",
    "incorrect_output_boot_std",
    "tolerance",
]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--noise", default="0,0.01,0.02,0.05")
    ap.add_argument("--rounds", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="grover_noise_scan.csv")
    args = ap.parse_args()

    tolerance = threshold_bound(2, 0)
    w = max(1, int(tolerance * args.rounds))
    with open(args.out, "w", newline="") as fh:
        wr = csv.DictWriter(fh, COLUMNS, lineterminator="\n")
        wr.writeheader()
        for p in (float(v) for v in args.noise.split(",")):
            noise = parse_noise(f"depol2={p}" if p else "")
            for tau in range(4):
                rep = run_protocol(
                    ProtocolParams(args.rounds, args.rounds, w, grover_pattern(tau)),
                    noise,
                    seed=args.seed,
                    truth=grover_expected(tau),
                    workers=args.workers,
                )
                boot = rep.bootstrap or {}
                wr.writerow(
                    {
                        "tau": tau,
                        "depol2": p,
                        "decision": rep.decision,
                        "c_fail": rep.c_fail,
                        "test_failure_rate": rep.test_failure_rate,
                        "incorrect_output_rate": rep.incorrect_output_rate,
                        "test_failure_boot_mean": boot.get("test_failure", {}).get("mean"),
                        "test_failure_boot_std": boot.get("test_failure", {}).get("std"),
                        "incorrect_output_boot_mean": boot.get("incorrect_output", {}).get("mean"),
                        "incorrect_output_boot_std": boot.get("incorrect_output", {}).get("std"),
                        "tolerance": tolerance,
                    }
                )
                print(f"p={p} tau={tau} {rep.decision} test={rep.test_failure_rate:.3f} "
                      f"incorrect={rep.incorrect_output_rate:.3f}", flush=True)


if __name__ == "__main__":
    main()
