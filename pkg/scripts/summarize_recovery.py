#!/usr/bin/env python3
"""Aggregate a recovery.csv into mean recovery per (q, gamma)."""

import argparse
import csv
from collections import defaultdict


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv_path", help="recovery.csv from `aol recover-synthetic`")
    args = parser.parse_args()

    sums = defaultdict(list)
    with open(args.csv_path) as fh:
        first = fh.readline()
        if not first.startswith("# aol-csv"):
            raise SystemExit(f"{args.csv_path}: not an aol CSV artifact")
        for row in csv.DictReader(fh):
            sums[(int(row["q"]), row["gamma"])].append(float(row["recovery_rate"]))

    print(f"{'q':>4} {'gamma':>8} {'trials':>7} {'mean_recovery':>14}")
    for (q, gamma), rates in sorted(sums.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        print(f"{q:>4} {gamma:>8} {len(rates):>7} {sum(rates) / len(rates):>14.4f}")


if __name__ == "__main__":
    main()
