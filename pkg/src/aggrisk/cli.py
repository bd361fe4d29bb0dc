"""Command-line entry point: ``aggrisk gen | run | metrics | bench``.

Exit codes: 0 success, 2 usage or configuration error, 3 I/O failure,
4 computation failure.  Only flags are read; the environment is not.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass, fields
import json
import logging
from pathlib import Path
import sys
import time
from typing import Optional, Sequence

from . import bench as benchmod
from .datagen import RNG_ALGORITHM, GenSpec, generate_portfolio, generate_yet
from .engine import PU, SU, AnalysisError, RunConfig, run_analysis
from .io import (
    FormatError,
    file_sha256,
    read_portfolio,
    read_yet,
    read_ylt,
    write_portfolio,
    write_yet,
    write_ylt,
)
from .lookup import BACKENDS, DEFAULT_MEMORY_BUDGET, MemoryBudgetError
from .metrics import exceedance_curve, pml, trial_losses, tvar
from .stats import IterationLimitError, Precision

log = logging.getLogger("aggrisk")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_COMPUTE = 4

MANIFEST_VERSION = 1


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# argument types
# ---------------------------------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _int_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    a = _positive_int(lo)
    b = _positive_int(hi) if hi else a
    if b < a:
        raise argparse.ArgumentTypeError(f"range {text!r} is empty")
    return a, b


def _int_list(text: str) -> list[int]:
    return [_positive_int(t) for t in text.split(",") if t]


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

_GEN_FLAGS = {
    "num_trials": "--trials",
    "events_per_trial": "--events-per-trial",
    "catalogue_size": "--catalogue",
    "xelts_per_layer": "--xelts",
    "events_per_xelt": "--events-per-xelt",
    "num_programs": "--programs",
    "layers_per_program": "--layers",
    "seed": "--seed",
}


def _add_spec_flags(p: argparse.ArgumentParser, xelts_default: int = 4) -> None:
    p.add_argument("--seed", type=int, default=1, help="64-bit generator seed (default 1)")
    p.add_argument("--trials", type=_positive_int, default=10_000, help="number of trials")
    p.add_argument("--events-per-trial", type=_int_range, default=(100, 100),
                   help="events per trial, N or LO:HI (default 100)")
    p.add_argument("--catalogue", type=_positive_int, default=10_000, help="event catalogue size")
    p.add_argument("--xelts", type=_positive_int, default=xelts_default, help="XELTs per layer")
    p.add_argument("--events-per-xelt", type=_positive_int, default=1_000, help="records per XELT")
    p.add_argument("--programs", type=_positive_int, default=1, help="programs in the portfolio")
    p.add_argument("--layers", type=_positive_int, default=1, help="layers per program")


def _spec_from_args(args) -> GenSpec:
    if args.events_per_xelt > args.catalogue:
        raise ConfigError(
            f"--events-per-xelt ({args.events_per_xelt}) exceeds --catalogue ({args.catalogue})"
        )
    try:
        return GenSpec(
            seed=args.seed, num_trials=args.trials, events_per_trial=args.events_per_trial,
            catalogue_size=args.catalogue, xelts_per_layer=args.xelts,
            events_per_xelt=args.events_per_xelt, num_programs=args.programs,
            layers_per_program=args.layers,
        )
    except ValueError as exc:
        msg = str(exc)
        for name, flag in _GEN_FLAGS.items():
            msg = msg.replace(name, flag)
        raise ConfigError(msg) from exc


def cmd_gen(args) -> int:
    spec = _spec_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    yet = generate_yet(spec)
    portfolio = generate_portfolio(spec)
    yet_path = out / "yet.bin"
    write_yet(yet, yet_path)
    generator = {"algorithm": RNG_ALGORITHM, "seed": spec.seed, "spec": spec.to_dict()}
    paths = [yet_path] + write_portfolio(portfolio, out, spec.catalogue_size, generator)
    total = sum(p.stat().st_size for p in paths)
    print(f"gen seed={spec.seed} trials={yet.num_trials} occurrences={yet.event_ids.size} "
          f"programs={spec.num_programs} layers={spec.num_programs * spec.layers_per_program} "
          f"xelts={sum(len(l.xelts) for pr in portfolio.programs for l in pr.layers)} "
          f"files={len(paths)} bytes={total} rng={RNG_ALGORITHM}")
    for p in paths:
        print(f"  {p}  {p.stat().st_size} bytes")
    return EXIT_OK


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunManifest:
    yet: str
    portfolio: str
    output: str
    mode: str = PU
    workers: int = 1
    chunk_size: int = 256
    backend: str = "direct_access"
    tolerance: float = 1e-6
    max_iterations: int = 200
    memory_budget: int = DEFAULT_MEMORY_BUDGET
    format_version: int = MANIFEST_VERSION

    @classmethod
    def load(cls, path) -> "RunManifest":
        doc = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown manifest keys: {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(f"malformed manifest {path}: {exc}") from exc

    def validate(self) -> None:
        if self.format_version != MANIFEST_VERSION:
            raise ConfigError(f"unsupported manifest version {self.format_version}")
        for label, path in (("--yet", self.yet), ("--portfolio", self.portfolio)):
            if not Path(path).is_file():
                raise FileNotFoundError(f"{label}: no such file {path}")

    def run_config(self) -> RunConfig:
        try:
            return RunConfig(mode=self.mode, worker_count=self.workers, chunk_size=self.chunk_size,
                             precision=Precision(self.tolerance, self.max_iterations),
                             lookup_backend=self.backend, memory_budget=self.memory_budget)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def cmd_run(args) -> int:
    if args.manifest:
        manifest = RunManifest.load(args.manifest)
    else:
        missing = [f for f, v in (("--yet", args.yet), ("--portfolio", args.portfolio),
                                  ("--out", args.out)) if v is None]
        if missing:
            raise ConfigError(f"missing required flags: {', '.join(missing)} (or use --manifest)")
        manifest = RunManifest(
            yet=args.yet, portfolio=args.portfolio, output=args.out, mode=args.mode,
            workers=args.workers, chunk_size=args.chunk_size, backend=args.backend,
            tolerance=args.tolerance, max_iterations=args.max_iterations,
            memory_budget=args.memory_budget,
        )
    cfg = manifest.run_config()
    manifest.validate()
    yet = read_yet(manifest.yet)
    portfolio, doc = read_portfolio(manifest.portfolio)
    if doc.get("catalogue_size", yet.catalogue_size) != yet.catalogue_size:
        raise ConfigError("portfolio and YET disagree on the catalogue size")
    t0 = time.perf_counter()
    ylt = run_analysis(portfolio, yet, cfg)
    wall = time.perf_counter() - t0
    write_ylt(ylt, manifest.output)
    print(f"run mode={cfg.mode} workers={cfg.worker_count} backend={cfg.lookup_backend} "
          f"trials={yet.num_trials} rows={len(ylt)} wall_seconds={wall:.3f} "
          f"total_loss={ylt.loss.sum():.6f} sha256={file_sha256(manifest.output)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def cmd_metrics(args) -> int:
    ylt = read_ylt(args.ylt)
    losses = ylt.trial_totals(args.program, args.layer)
    report = {"trials": int(losses.size), "pml": {}, "tvar": {}}
    for rp in args.return_periods:
        report["pml"][f"{rp:g}"] = pml(losses, rp)
        print(f"PML return_period={rp:g} loss={report['pml'][f'{rp:g}']:.6f}")
    for p in args.tvar:
        report["tvar"][f"{p:g}"] = tvar(losses, p)
        print(f"TVaR p={p:g} loss={report['tvar'][f'{p:g}']:.6f}")
    if args.curve:
        curve = exceedance_curve(losses)
        with open(args.curve, "w") as fh:
            fh.write("loss,exceedance_probability\n")
            for loss, prob in curve.points:
                fh.write(f"{loss:.6f},{prob!r}\n")
        print(f"curve written to {args.curve} ({losses.size} points)")
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

SCENARIOS = ("lookup", "scaling", "split", "phases")


def cmd_bench(args) -> int:
    spec = _spec_from_args(args)
    if args.scenario == "lookup":
        report = benchmod.bench_lookup(spec, probes=args.probes, repeats=args.repeats,
                                       memory_budget=args.memory_budget)
    elif args.scenario == "scaling":
        report = benchmod.bench_scaling(spec, args.workers, mode=args.mode,
                                        trial_counts=args.trial_counts, repeats=args.repeats)
    elif args.scenario == "split":
        report = benchmod.bench_split(
            spec, benchmod.PoolConfig(args.pool_a), benchmod.PoolConfig(args.pool_b),
            fractions=args.fractions, mode=args.mode, concurrent=args.concurrent,
            repeats=args.repeats)
    else:
        report = benchmod.bench_phases(spec, workers=args.workers[0], repeats=args.repeats)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"bench_{args.scenario}.csv"
    log_path = out / f"bench_{args.scenario}.jsonl"
    report.write_csv(csv_path)
    report.write_jsonl(log_path)
    for rec in report.records():
        print(json.dumps(rec, default=benchmod._jsonable))
    print(f"wrote {csv_path} and {log_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aggrisk", description=__doc__.splitlines()[0])
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic YET, XELTs and portfolio")
    _add_spec_flags(g)
    g.add_argument("--out", default=".", help="output directory")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run aggregate risk analysis and write a YLT")
    r.add_argument("--manifest", help="JSON run manifest (replaces the flags below)")
    r.add_argument("--yet", help="YET binary file")
    r.add_argument("--portfolio", help="portfolio JSON file")
    r.add_argument("--out", help="YLT CSV to write")
    r.add_argument("--mode", choices=(PU, SU), default=PU, help="PU or SU (default PU)")
    r.add_argument("--workers", type=_positive_int, default=1)
    r.add_argument("--chunk-size", type=_positive_int, default=256, help="trials per work unit")
    r.add_argument("--backend", choices=sorted(BACKENDS), default="direct_access")
    r.add_argument("--tolerance", type=float, default=1e-6, help="inverse beta relative tolerance")
    r.add_argument("--max-iterations", type=_positive_int, default=200)
    r.add_argument("--memory-budget", type=_positive_int, default=DEFAULT_MEMORY_BUDGET,
                   help="bytes allowed for a direct-access table")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("metrics", help="PML, TVaR and exceedance curve from a YLT")
    m.add_argument("ylt", help="YLT CSV")
    m.add_argument("--return-periods", type=_float_list, default=[10.0, 100.0, 250.0])
    m.add_argument("--tvar", type=_float_list, default=[0.99])
    m.add_argument("--curve", help="write the exceedance curve to this CSV")
    m.add_argument("--program", type=int, help="restrict to one program")
    m.add_argument("--layer", type=int, help="restrict to one layer")
    m.add_argument("--json", help="also write the report as JSON")
    m.set_defaults(func=cmd_metrics)

    b = sub.add_parser("bench", help="benchmark scenarios")
    b.add_argument("scenario", choices=SCENARIOS)
    _add_spec_flags(b)
    b.add_argument("--mode", choices=(PU, SU), default=SU)
    b.add_argument("--workers", type=_int_list, default=[1, 2, 4, 8],
                   help="worker counts for scaling; first entry is used by phases")
    b.add_argument("--trial-counts", type=_int_list, default=None,
                   help="trial counts for the linearity sweep (scaling)")
    b.add_argument("--probes", type=_positive_int, default=1_000_000)
    b.add_argument("--memory-budget", type=_positive_int, default=DEFAULT_MEMORY_BUDGET)
    b.add_argument("--fractions", type=_float_list,
                   default=[round(0.1 * k, 1) for k in range(1, 10)])
    b.add_argument("--pool-a", type=_positive_int, default=2, help="workers in pool A")
    b.add_argument("--pool-b", type=_positive_int, default=6, help="workers in pool B")
    b.add_argument("--concurrent", action="store_true", help="run split pools at the same time")
    b.add_argument("--repeats", type=_positive_int, default=3)
    b.add_argument("--out-dir", default=".", help="where to write the CSV and JSONL reports")
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (AnalysisError, IterationLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except (ConfigError, FormatError, ValueError, MemoryBudgetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
