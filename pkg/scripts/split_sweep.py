#!/usr/bin/env python3
"""Tabulate the two-pool split sweep for a few pool shapes.

Pool times are measured standalone by default; ``--concurrent`` starts both
pools together so they compete for the same cores.
"""

import argparse

import psutil

from aggrisk.bench import PoolConfig, bench_split
from aggrisk.datagen import GenSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--pools", default="2:6,2:2,1:3", help="comma list of A:B worker counts")
    ap.add_argument("--concurrent", action="store_true")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    spec = GenSpec.desk(num_trials=args.trials)
    print(f"physical cores: {psutil.cpu_count(logical=False)}")
    for pair in args.pools.split(","):
        a, b = (int(x) for x in pair.split(":"))
        r = bench_split(spec, PoolConfig(a), PoolConfig(b), concurrent=args.concurrent,
                        repeats=args.repeats)
        print(f"\npool A={a} workers, pool B={b} workers")
        print(f"{'fraction':>8} {'A (s)':>8} {'B (s)':>8} {'max':>8}")
        for row in r.derived["sweep"]:
            ta, tb = row["seconds_a"], row["seconds_b"]
            mark = "  <-" if row["fraction"] == r.derived["inflection"] else ""
            print(f"{row['fraction']:>8g} {ta:8.3f} {tb:8.3f} {max(ta, tb):8.3f}{mark}")
        print(f"inflection {r.derived['inflection']:g}, imbalance {r.derived['inflection_imbalance']:.1%}")


if __name__ == "__main__":
    main()
