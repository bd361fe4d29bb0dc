"""Desk-scale benchmark scenarios.

Every scenario first checks that the configurations it times produce the
same year loss table as the default configuration, then times them.  Each
timing discards one warm-up call and reports the median of ``repeats`` runs.

Phase decomposition is done by differential runs of the same kernel:

* ``event_fetch_lookup``: kernel pass that only fetches events and resolves
  their XELT records (summing raw mean losses);
* ``financial_terms``: full primary-uncertainty run minus the above;
* ``secondary_uncertainty``: full secondary-uncertainty run minus the
  primary-uncertainty run.

The three phases therefore add up to the secondary-uncertainty run time.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field, replace
import datetime as _dt
import hashlib
import json
import os
from pathlib import Path
import platform
import statistics
import time
from typing import Callable, Optional, Sequence

import numba
import numpy as np
import psutil

from .datagen import GenSpec, _rng, generate_layer, generate_portfolio, generate_yet
from .engine import (
    PU,
    SU,
    STAGE_LOOKUP,
    RunConfig,
    build_lookups,
    run_analysis,
    run_split,
    run_stage,
)
from .lookup import (
    BACKENDS,
    MemoryBudgetError,
    DEFAULT_MEMORY_BUDGET,
    _resolve_many,
    build_loss_lookup,
    direct_access_bytes,
    direct_access_slots,
)
from .model import Portfolio

COMBINED = "direct_access_combined"
LOOKUP_VARIANTS = tuple(BACKENDS) + (COMBINED,)
CSV_COLUMNS = ("scenario", "config_hash", "phase", "seconds")


def environment_fingerprint() -> dict:
    return {
        "logical_cores": os.cpu_count(),
        "physical_cores": psutil.cpu_count(logical=False),
        "platform": platform.platform(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "numba": numba.__version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


@dataclass
class BenchReport:
    scenario: str
    config: dict
    phases: list[tuple[str, float]] = field(default_factory=list)
    derived: dict = field(default_factory=dict)
    environment: dict = field(default_factory=environment_fingerprint)

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.config, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def add(self, phase: str, seconds: float) -> None:
        if seconds < 0:
            raise ValueError(f"phase {phase!r} has negative time {seconds}")
        self.phases.append((phase, float(seconds)))

    def seconds(self, phase: str) -> float:
        for name, secs in self.phases:
            if name == phase:
                return secs
        raise KeyError(phase)

    def csv_rows(self) -> list[dict]:
        return [{"scenario": self.scenario, "config_hash": self.config_hash, "phase": p,
                 "seconds": f"{s:.6f}"} for p, s in self.phases]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
            writer.writeheader()
            writer.writerows(self.csv_rows())

    def records(self) -> list[dict]:
        """Line-oriented structured log: one record per phase, then a summary."""
        base = {"scenario": self.scenario, "config_hash": self.config_hash}
        out = [{**base, "kind": "phase", "phase": p, "seconds": s} for p, s in self.phases]
        out.append({**base, "kind": "summary", "config": self.config, "derived": self.derived,
                    "environment": self.environment})
        return out

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.records():
                fh.write(json.dumps(rec, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return str(obj)


def timed(fn: Callable[[], object], repeats: int = 3) -> tuple[float, object]:
    """Median wall time of ``repeats`` calls after one discarded warm-up."""
    result = fn()
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples), result


def _spec_config(spec: GenSpec, **extra) -> dict:
    return {"spec": spec.to_dict(), **extra}


# ---------------------------------------------------------------------------
# Lookup structures
# ---------------------------------------------------------------------------


def _build_variant(layer, catalogue_size, variant, memory_budget):
    if variant == COMBINED:
        return build_loss_lookup(layer, catalogue_size, "direct_access", memory_budget, combined=True)
    return build_loss_lookup(layer, catalogue_size, variant, memory_budget)


def bench_lookup(spec: GenSpec, backends: Sequence[str] = LOOKUP_VARIANTS, probes: int = 1_000_000,
                 memory_budget: int = DEFAULT_MEMORY_BUDGET, repeats: int = 3,
                 check_trials: int = 1_000) -> BenchReport:
    """Build time, memory and probe throughput of each lookup structure.

    Backends whose direct-access table would exceed ``memory_budget`` are
    reported under ``derived["skipped"]`` instead of failing the scenario.
    """
    for b in backends:
        if b not in LOOKUP_VARIANTS:
            raise ValueError(f"unknown backend {b!r}; choose from {list(LOOKUP_VARIANTS)}")
    report = BenchReport("lookup", _spec_config(spec, backends=list(backends), probes=probes,
                                                memory_budget=memory_budget, repeats=repeats))
    layer = generate_layer(spec)
    n_x = len(layer.xelts)
    cat = spec.catalogue_size
    report.derived["direct_access_slots"] = direct_access_slots(cat, n_x)
    report.derived["direct_access_bytes"] = direct_access_bytes(cat, n_x)

    built, skipped = {}, {}
    for b in backends:
        try:
            secs, lk = timed(lambda b=b: _build_variant(layer, cat, b, memory_budget), repeats)
        except MemoryBudgetError as exc:
            skipped[b] = str(exc)
            continue
        built[b] = lk
        report.add(f"{b}.build", secs)
    report.derived["skipped"] = skipped
    report.derived["memory_bytes"] = {b: lk.nbytes for b, lk in built.items()}

    rng = _rng(spec.seed, 99)
    xi = rng.integers(0, n_x, size=probes, dtype=np.int64)
    ev = rng.integers(1, cat + 1, size=probes, dtype=np.int64)
    answers = {}
    for b, lk in built.items():
        out = np.empty(probes, dtype=np.int64)
        _resolve_many(lk.kind, xi, ev, lk.index, lk.values, lk.bounds, lk.aux, out)
        answers[b] = out
    first = next(iter(answers.values()), None)
    for b, ans in answers.items():
        if not np.array_equal(ans, first):
            raise AssertionError(f"backend {b} disagrees with the others on probe results")
    report.derived["probe_hit_rate"] = float(np.mean(first >= 0)) if first is not None else None

    if built:
        check_spec = replace(spec, num_trials=min(check_trials, spec.num_trials))
        yet = generate_yet(check_spec)
        pf = Portfolio.single(layer)
        ref = None
        for b, lk in built.items():
            ylt = run_analysis(pf, yet, RunConfig(mode=PU), lookups=[lk])
            if ref is None:
                ref = ylt
            elif ylt != ref:
                raise AssertionError(f"backend {b} changes the year loss table")

    throughput = {}
    for b, lk in built.items():
        out = np.empty(probes, dtype=np.int64)
        secs, _ = timed(lambda lk=lk, out=out: _resolve_many(lk.kind, xi, ev, lk.index, lk.values,
                                                              lk.bounds, lk.aux, out), repeats)
        report.add(f"{b}.probe", secs)
        throughput[b] = probes / secs if secs > 0 else float("inf")
    report.derived["probes_per_second"] = throughput
    report.derived["ranking"] = sorted(throughput, key=throughput.get, reverse=True)
    return report


# ---------------------------------------------------------------------------
# Scaling
# ---------------------------------------------------------------------------


def bench_scaling(spec: GenSpec, worker_counts: Sequence[int], mode: str = SU,
                  trial_counts: Optional[Sequence[int]] = None, chunk_size: int = 256,
                  repeats: int = 3) -> BenchReport:
    """Wall time per worker count, and optionally per number of trials.

    Worker rows are named ``workers=<n>``; trial rows ``trials=<n>`` and run
    on a single worker.  Derived values hold the speedup over one worker and
    the ratios between consecutive trial counts.
    """
    if not worker_counts:
        raise ValueError("worker_counts must not be empty")
    report = BenchReport("scaling", _spec_config(spec, worker_counts=list(worker_counts), mode=mode,
                                                 trial_counts=list(trial_counts or []),
                                                 chunk_size=chunk_size, repeats=repeats))
    yet = generate_yet(spec)
    pf = generate_portfolio(spec)
    base_cfg = RunConfig(mode=mode, chunk_size=chunk_size)
    lookups = build_lookups(pf, yet.catalogue_size, base_cfg)
    reference = run_analysis(pf, yet, base_cfg, lookups)

    times = {}
    for w in dict.fromkeys([1, *worker_counts]):
        cfg = replace(base_cfg, worker_count=w)
        if run_analysis(pf, yet, cfg, lookups) != reference:
            raise AssertionError(f"{w} workers change the year loss table")
        secs, _ = timed(lambda cfg=cfg: run_analysis(pf, yet, cfg, lookups), repeats)
        times[w] = secs
    for w in worker_counts:
        report.add(f"workers={w}", times[w])
    report.derived["speedup"] = {w: times[1] / times[w] for w in worker_counts}

    if trial_counts:
        t_times = []
        for n in trial_counts:
            yet_n = generate_yet(replace(spec, num_trials=n))
            secs, _ = timed(lambda y=yet_n: run_analysis(pf, y, base_cfg, lookups), repeats)
            report.add(f"trials={n}", secs)
            t_times.append(secs)
        report.derived["trial_time_ratios"] = [b / a for a, b in zip(t_times, t_times[1:])]
    return report


# ---------------------------------------------------------------------------
# Phase decomposition
# ---------------------------------------------------------------------------


def bench_phases(spec: GenSpec, workers: int = 1, repeats: int = 3) -> BenchReport:
    """Split SU run time into lookup, financial-terms and secondary-uncertainty phases."""
    report = BenchReport("phases", _spec_config(spec, workers=workers, repeats=repeats))
    t0 = time.perf_counter()
    yet = generate_yet(spec)
    pf = generate_portfolio(spec)
    pu_cfg = RunConfig(mode=PU, worker_count=workers)
    su_cfg = RunConfig(mode=SU, worker_count=workers)
    lookups = build_lookups(pf, yet.catalogue_size, pu_cfg)
    report.add("data_build", time.perf_counter() - t0)

    if run_analysis(pf, yet, replace(pu_cfg, worker_count=1), lookups) != run_analysis(pf, yet, pu_cfg, lookups):
        raise AssertionError("worker count changes the year loss table")

    t_lookup, _ = timed(lambda: run_stage(pf, yet, pu_cfg, STAGE_LOOKUP, lookups), repeats)
    t_pu, _ = timed(lambda: run_analysis(pf, yet, pu_cfg, lookups), repeats)
    t_su, _ = timed(lambda: run_analysis(pf, yet, su_cfg, lookups), repeats)
    phases = {
        "event_fetch_lookup": t_lookup,
        "financial_terms": max(t_pu - t_lookup, 0.0),
        "secondary_uncertainty": max(t_su - t_pu, 0.0),
    }
    for name, secs in phases.items():
        report.add(name, secs)
    report.add("total_pu", t_pu)
    report.add("total_su", t_su)
    instrumented = sum(phases.values())
    report.derived["su_share"] = phases["secondary_uncertainty"] / instrumented if instrumented else 0.0
    report.derived["su_over_pu"] = t_su / t_pu if t_pu > 0 else float("inf")
    return report


# ---------------------------------------------------------------------------
# Two-pool split
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PoolConfig:
    workers: int
    chunk_size: int = 256


def bench_split(spec: GenSpec, pool_a: PoolConfig, pool_b: PoolConfig,
                fractions: Sequence[float] = tuple(round(0.1 * k, 1) for k in range(1, 10)),
                mode: str = SU, concurrent: bool = False, repeats: int = 3) -> BenchReport:
    """Sweep the share of trials sent to pool A and locate the balance point.

    The reported ``inflection`` is the fraction with the smallest
    ``max(time_a, time_b)``.
    """
    if len(fractions) < 2:
        raise ValueError("need at least two split fractions")
    report = BenchReport("split", _spec_config(spec, pool_a=asdict(pool_a), pool_b=asdict(pool_b),
                                               fractions=list(fractions), mode=mode,
                                               concurrent=concurrent, repeats=repeats))
    yet = generate_yet(spec)
    pf = generate_portfolio(spec)
    cfg_a = RunConfig(mode=mode, worker_count=pool_a.workers, chunk_size=pool_a.chunk_size)
    cfg_b = RunConfig(mode=mode, worker_count=pool_b.workers, chunk_size=pool_b.chunk_size)
    lookups = build_lookups(pf, yet.catalogue_size, cfg_a)
    reference = run_analysis(pf, yet, RunConfig(mode=mode), lookups)

    sweep = []
    for f in fractions:
        ylt, _ = run_split(pf, yet, cfg_a, cfg_b, f, concurrent, lookups)
        if ylt != reference:
            raise AssertionError(f"split fraction {f} changes the year loss table")
        samples = [run_split(pf, yet, cfg_a, cfg_b, f, concurrent, lookups)[1] for _ in range(repeats)]
        ta = statistics.median(s.seconds_a for s in samples)
        tb = statistics.median(s.seconds_b for s in samples)
        report.add(f"fraction={f:g}.pool_a", ta)
        report.add(f"fraction={f:g}.pool_b", tb)
        sweep.append((f, ta, tb))
    best = min(sweep, key=lambda r: max(r[1], r[2]))
    f, ta, tb = best
    report.derived["sweep"] = [{"fraction": f_, "seconds_a": a, "seconds_b": b} for f_, a, b in sweep]
    report.derived["inflection"] = f
    report.derived["inflection_imbalance"] = abs(ta - tb) / max(ta, tb) if max(ta, tb) > 0 else 0.0
    return report
