#!/usr/bin/env python3
"""Run every benchmark scenario at desk scale and write CSV + JSONL reports.

    python scripts/run_desk_benchmarks.py --out-dir results/
"""

import argparse
import json
from pathlib import Path

from aggrisk.bench import PoolConfig, bench_lookup, bench_phases, bench_scaling, bench_split
from aggrisk.datagen import GenSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out-dir", default="bench_results")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--workers", default="1,2,4,8")
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = GenSpec.desk(seed=args.seed)
    workers = [int(w) for w in args.workers.split(",")]

    reports = [
        bench_lookup(GenSpec.desk(seed=args.seed, catalogue_size=100_000), repeats=args.repeats),
        bench_scaling(spec, workers, trial_counts=[5_000, 10_000, 20_000], repeats=args.repeats),
        bench_phases(spec, repeats=args.repeats),
        bench_split(spec, PoolConfig(2), PoolConfig(6), repeats=args.repeats),
    ]
    for r in reports:
        r.write_csv(out / f"bench_{r.scenario}.csv")
        r.write_jsonl(out / f"bench_{r.scenario}.jsonl")
        derived = {k: v for k, v in r.derived.items() if k != "sweep"}
        print(f"[{r.scenario}] " + json.dumps(derived, default=str))
    print(f"reports in {out}/")


if __name__ == "__main__":
    main()
