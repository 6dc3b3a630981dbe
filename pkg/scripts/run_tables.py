"""Desk-scale Monte-Carlo table: one row per (preset, n).

    python scripts/run_tables.py --n 50 500 --replications 100 --out tables.csv
"""
import argparse
import csv
import os
import sys
import time

from pathmed import FitOptions, SimConfig, TuningPlan, run_experiment
from pathmed.tuning import PRESETS

COLUMNS = ("ie_estimate", "mse", "sensitivity", "specificity", "mspe")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[50, 500])
    ap.add_argument("--presets", nargs="+", default=sorted(PRESETS), choices=sorted(PRESETS))
    ap.add_argument("--replications", type=int, default=100)
    ap.add_argument("--seed", type=int, default=20240)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--out", default=None, help="optional CSV destination")
    args = ap.parse_args(argv)

    rows = []
    print(f"{'preset':<10} {'n':>5} " + " ".join(f"{c:>12}" for c in COLUMNS) + f" {'seconds':>8}")
    for name in args.presets:
        for n in args.n:
            config = SimConfig(n=n, replications=args.replications, seed=args.seed)
            start = time.perf_counter()
            agg = run_experiment(config, TuningPlan.preset(name), FitOptions(), workers=args.workers).aggregates()
            secs = time.perf_counter() - start
            rows.append({"preset": name, "n": n, **{c: agg[c] for c in COLUMNS}, "skips": agg["skips"]})
            print(f"{name:<10} {n:>5} " + " ".join(f"{agg[c]:>12.4f}" for c in COLUMNS) + f" {secs:>8.1f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
