"""Heatmaps of test failure and incorrect output rates from a sweep CSV.

    python scripts/plot_volumetric.py volumetric_sweep.csv --out volumetric.png
"""

from __future__ import annotations

import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv")
    ap.add_argument("--out", default="volumetric.png")
    args = ap.parse_args()

    by_noise = defaultdict(list)
    with open(args.csv) as fh:
        for row in csv.DictReader(fh):
            by_noise[float(row.get("depol2", 0))].append(row)

    levels = sorted(by_noise)
    fig, axes = plt.subplots(len(levels), 2, figsize=(8, 3.2 * len(levels)), squeeze=False)
    for r, p in enumerate(levels):
        rows = by_noise[p]
        ns = sorted({int(x["n"]) for x in rows})
        ms = sorted({int(x["m"]) for x in rows})
        for c, key in enumerate(("test_failure_mean", "incorrect_output_mean")):
            grid = np.full((len(ns), len(ms)), np.nan)
            for x in rows:
                grid[ns.index(int(x["n"])), ms.index(int(x["m"]))] = float(x[key])
            ax = axes[r][c]
            im = ax.imshow(grid, origin="lower", vmin=0, vmax=1, cmap="viridis")
            ax.set_xticks(range(len(ms)), ms)
            ax.set_yticks(range(len(ns)), ns)
            ax.set_xlabel("layers m")
            ax.set_ylabel("wires n")
            ax.set_title(f"{key.replace('_mean', '').replace('_', ' ')}, p={p}")
            for i in range(len(ns)):
                for j in range(len(ms)):
                    ax.text(j, i, f"{grid[i, j]:.2f}", ha="center", va="center", color="w", fontsize=8)
            fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
