#!/usr/bin/env python3
"""
Print natlas report CSV files as aligned terminal tables.

Usage examples:
  python atlas/scripts/report_table.py out/neuron_counts.csv
  python atlas/scripts/report_table.py out/forcing_summary.csv out/overlap.csv
"""
import argparse
import csv
from pathlib import Path


def read_table(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return [], []
    return rows[0], rows[1:]


def print_table(title, cols, rows):
    print(f"\n== {title} ==")
    if not rows:
        print("(no rows)")
        return
    widths = [max(len(str(c)), max((len(str(r[i])) for r in rows if i < len(r)), default=0)) for i, c in enumerate(cols)]
    fmt = "  " + " | ".join("{:<" + str(w) + "}" for w in widths)
    print(fmt.format(*cols))
    print("  " + "-+-".join("-" * w for w in widths))
    for r in rows:
        padded = [*r, *[""] * (len(cols) - len(r))]
        print(fmt.format(*[str(x) for x in padded[: len(cols)]]))


def main():
    ap = argparse.ArgumentParser(description="Print natlas CSV reports")
    ap.add_argument("paths", nargs="+", help="CSV files written by natlas commands")
    args = ap.parse_args()

    for path in args.paths:
        try:
            cols, rows = read_table(path)
            print_table(Path(path).name, cols, rows)
        except OSError as e:
            print(f"\n== {path} ==\nERROR: {e}")


if __name__ == "__main__":
    main()
