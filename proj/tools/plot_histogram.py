#!/usr/bin/env python3
"""Plot one or more histogram.csv files written by `gftnn eval`."""
import argparse
import csv


def load(path):
    lo, counts = [], []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            lo.append(float(row["bin_lo"]))
            counts.append(int(row["count"]))
    width = lo[1] - lo[0] if len(lo) > 1 else 1.0
    return lo, counts, width


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv", nargs="+")
    ap.add_argument("--save", help="write the figure here instead of showing it")
    args = ap.parse_args()

    import matplotlib
    if args.save:
        matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots()
    for path in args.csv:
        lo, counts, width = load(path)
        ax.bar(lo, counts, width=width, align="edge", alpha=0.5, label=path)
    ax.set_xlabel("per-scenario ADE (m)")
    ax.set_ylabel("scenarios")
    ax.legend()
    if args.save:
        fig.savefig(args.save)
    else:
        plt.show()


if __name__ == "__main__":
    main()
