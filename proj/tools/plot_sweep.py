#!/usr/bin/env python3
"""Plot a threshold sweep CSV written by `ctap sweep tau`.

usage: plot_sweep.py sweep_tau.csv out.png
"""
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main(argv):
    if len(argv) != 3:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    df = pd.read_csv(argv[1])
    required = {"tau", "reduction_pct", "bpr_gap_pct", "link_r2", "cpu_per_inner"}
    missing = required - set(df.columns)
    if missing:
        print(f"missing columns: {sorted(missing)}", file=sys.stderr)
        return 2
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))
    axes[0].plot(df["reduction_pct"], df["link_r2"], "o-")
    axes[0].set_xlabel("variables compressed (%)")
    axes[0].set_ylabel("link R$^2$")
    axes[1].plot(df["reduction_pct"], df["bpr_gap_pct"], "o-")
    axes[1].set_xlabel("variables compressed (%)")
    axes[1].set_ylabel("BPR gap (%)")
    base = df["cpu_per_inner"].iloc[0]
    axes[2].plot(df["reduction_pct"], base / df["cpu_per_inner"], "o-")
    axes[2].set_xlabel("variables compressed (%)")
    axes[2].set_ylabel("speedup per inner iteration")
    fig.tight_layout()
    fig.savefig(argv[2], dpi=120)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
