"""Aggregate risk analysis over a year event table.

Each trial is independent: the events of a trial are looked up in every XELT
of the layer, optionally perturbed by secondary uncertainty, netted through
ELT, occurrence and aggregate terms, and written to the trial's own slot of
the output.  Work is split into contiguous chunks of trials, so the result
does not depend on how many workers run or in which order chunks finish.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import time
from typing import Callable, Optional, Sequence

import numba as nb
import numpy as np

from .lookup import BACKENDS, DEFAULT_MEMORY_BUDGET, LossLookup, build_loss_lookup, _resolve
from .model import Layer, Portfolio, Trial, YearEventTable, YearLossTable, _apply_terms
from .stats import STATUS_OK, IterationLimitError, Precision
from .uncertainty import _secondary_loss

PU = "PU"
SU = "SU"

# Kernel stages.  STAGE_LOOKUP only fetches events and sums raw mean losses;
# the benchmark harness uses it to isolate memory-access time.
STAGE_LOOKUP = 0
STAGE_PU = 1
STAGE_SU = 2

# Program p sees z_prog_e shifted by frac(p * GOLDEN), so programs draw
# different (still uniform) numbers for the same occurrence.
GOLDEN = 0.6180339887498949


@dataclass(frozen=True)
class RunConfig:
    mode: str = PU
    worker_count: int = 1
    chunk_size: int = 256
    precision: Precision = field(default_factory=Precision)
    lookup_backend: str = "direct_access"
    memory_budget: int = DEFAULT_MEMORY_BUDGET

    def __post_init__(self):
        if self.mode not in (PU, SU):
            raise ValueError(f"mode must be 'PU' or 'SU', got {self.mode!r}")
        if self.worker_count < 1:
            raise ValueError(f"worker_count must be >= 1, got {self.worker_count}")
        if self.chunk_size < 1:
            raise ValueError(f"chunk_size must be >= 1, got {self.chunk_size}")
        if self.lookup_backend not in BACKENDS:
            raise ValueError(
                f"unknown lookup backend {self.lookup_backend!r}; choose from {sorted(BACKENDS)}"
            )

    @property
    def stage(self) -> int:
        return STAGE_SU if self.mode == SU else STAGE_PU


class AnalysisError(ArithmeticError):
    """One or more trials failed; ``failures`` lists (program, layer, trial_id)."""

    def __init__(self, failures: Sequence[tuple[int, int, int]]):
        self.failures = list(failures)
        head = ", ".join(f"program {p} layer {l} trial {t}" for p, l, t in self.failures[:5])
        more = f" and {len(self.failures) - 5} more" if len(self.failures) > 5 else ""
        super().__init__(f"secondary uncertainty did not converge for {head}{more}")


@nb.njit(cache=True, nogil=True)
def _run_trials(start, stop, offsets, event_ids, z_prog, z_shift,
                kind, index, values, bounds, aux, n_xelt,
                mean, sig_i, sig_c, max_l, z_e, elt_ret, elt_lim,
                occ_r, occ_l, agg_r, agg_l, stage, tol, max_iter, out, status):
    for t in range(start, stop):
        cum = 0.0
        flag = STATUS_OK
        for k in range(offsets[t], offsets[t + 1]):
            e = event_ids[k]
            event_loss = 0.0
            for j in range(n_xelt):
                r = _resolve(kind, j, e, index, values, bounds, aux)
                if r < 0:
                    continue
                if stage == STAGE_SU:
                    z = z_prog[k] + z_shift
                    if z >= 1.0:
                        z -= 1.0
                    if z <= 0.0:
                        z = 1.1102230246251565e-16
                    loss, s = _secondary_loss(mean[r], sig_i[r], sig_c[r], max_l[r], z_e[r], z,
                                              tol, max_iter)
                    if s != STATUS_OK:
                        flag = s
                else:
                    loss = mean[r]
                if stage == STAGE_LOOKUP:
                    event_loss += loss
                else:
                    event_loss += _apply_terms(loss, elt_ret[j], elt_lim[j])
            if stage == STAGE_LOOKUP:
                cum += event_loss
            else:
                cum += _apply_terms(event_loss, occ_r, occ_l)
        if stage == STAGE_LOOKUP:
            out[t] = cum
        else:
            out[t] = _apply_terms(cum, agg_r, agg_l)
        status[t] = flag


def program_shift(program_index: int) -> float:
    return (program_index * GOLDEN) % 1.0


def _kernel_args(yet: YearEventTable, layer: Layer, lookup: LossLookup, z_shift: float):
    t = layer.terms
    return (
        yet.offsets, yet.event_ids, yet.z_prog_e, z_shift,
        lookup.kind, lookup.index, lookup.values, lookup.bounds, lookup.aux, lookup.n_xelts,
        lookup.mean_loss, lookup.sigma_i, lookup.sigma_c, lookup.max_loss, lookup.z_e,
        lookup.elt_retention, lookup.elt_limit,
        float(t.occ_retention), float(t.occ_limit), float(t.agg_retention), float(t.agg_limit),
    )


def _chunks(lo: int, hi: int, size: int):
    return [(s, min(s + size, hi)) for s in range(lo, hi, size)]


def _execute(tasks: list[Callable[[], None]], workers: int, executor=None) -> None:
    if executor is not None:
        for f in [executor.submit(task) for task in tasks]:
            f.result()
    elif workers == 1:
        for task in tasks:
            task()
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for f in [pool.submit(task) for task in tasks]:
                f.result()


def _layers(portfolio: Portfolio):
    for p, prog in enumerate(portfolio.programs):
        for l, layer in enumerate(prog.layers):
            yield p, l, layer


def _run_range(portfolio, yet, cfg: RunConfig, lo: int, hi: int, outs, statuses, lookups,
               stage: Optional[int] = None, executor=None) -> None:
    """Fill ``outs[i][lo:hi]`` for every layer ``i`` of the portfolio."""
    stage = cfg.stage if stage is None else stage
    tol = cfg.precision.relative_tolerance
    max_iter = cfg.precision.max_iterations
    tasks = []
    for i, (p, l, layer) in enumerate(_layers(portfolio)):
        args = _kernel_args(yet, layer, lookups[i], program_shift(p))
        out, status = outs[i], statuses[i]
        for s, e in _chunks(lo, hi, cfg.chunk_size):
            tasks.append(lambda s=s, e=e, args=args, out=out, status=status: _run_trials(
                s, e, *args, stage, tol, max_iter, out, status))
    _execute(tasks, cfg.worker_count, executor)


def build_lookups(portfolio: Portfolio, catalogue_size: int, cfg: RunConfig) -> list[LossLookup]:
    return [
        build_loss_lookup(layer, catalogue_size, cfg.lookup_backend, cfg.memory_budget)
        for _, _, layer in _layers(portfolio)
    ]


def _assemble(portfolio, yet, outs, statuses) -> YearLossTable:
    n = yet.num_trials
    keys = list((p, l) for p, l, _ in _layers(portfolio))
    failures = [
        (p, l, int(t))
        for (p, l), st in zip(keys, statuses)
        for t in np.flatnonzero(st != STATUS_OK)
    ]
    if failures:
        raise AnalysisError(failures)
    ids = np.arange(n, dtype=np.int64)
    return YearLossTable(
        program=np.repeat([p for p, _ in keys], n).astype(np.int64),
        layer=np.repeat([l for _, l in keys], n).astype(np.int64),
        trial_id=np.tile(ids, len(keys)),
        loss=np.concatenate(outs) if outs else np.empty(0),
    )


def _buffers(portfolio, n):
    k = sum(1 for _ in _layers(portfolio))
    return [np.empty(n) for _ in range(k)], [np.zeros(n, dtype=np.int8) for _ in range(k)]


def run_analysis(portfolio: Portfolio, yet: YearEventTable, cfg: RunConfig = RunConfig(),
                 lookups: Optional[list[LossLookup]] = None) -> YearLossTable:
    """Year loss table with one row per (program, layer, trial).

    Raises
    ------
    AnalysisError
        If secondary uncertainty fails to converge for any trial; the error
        names every failing (program, layer, trial).
    """
    if lookups is None:
        lookups = build_lookups(portfolio, yet.catalogue_size, cfg)
    outs, statuses = _buffers(portfolio, yet.num_trials)
    _run_range(portfolio, yet, cfg, 0, yet.num_trials, outs, statuses, lookups)
    return _assemble(portfolio, yet, outs, statuses)


def trial_loss(trial: Trial, layer: Layer, lookup: LossLookup, cfg: RunConfig = RunConfig()) -> float:
    """Loss of a single trial against one layer."""
    yet = YearEventTable.from_trials([Trial(0, trial.occurrences)], lookup.catalogue_size)
    out = np.empty(1)
    status = np.zeros(1, dtype=np.int8)
    _run_trials(0, 1, *_kernel_args(yet, layer, lookup, 0.0), cfg.stage,
                cfg.precision.relative_tolerance, cfg.precision.max_iterations, out, status)
    if status[0] != STATUS_OK:
        raise IterationLimitError(
            f"secondary uncertainty did not converge in trial {trial.trial_id}",
            last_iterate=float(out[0]), iterations=cfg.precision.max_iterations,
        )
    return float(out[0])


@dataclass(frozen=True)
class SplitTiming:
    split_fraction: float
    trials_a: int
    trials_b: int
    seconds_a: float
    seconds_b: float

    @property
    def makespan(self) -> float:
        return max(self.seconds_a, self.seconds_b)

    @property
    def imbalance(self) -> float:
        return abs(self.seconds_a - self.seconds_b) / self.makespan if self.makespan > 0 else 0.0


def run_split(portfolio: Portfolio, yet: YearEventTable, cfg_a: RunConfig, cfg_b: RunConfig,
              split_fraction: float, concurrent: bool = False,
              lookups: Optional[list[LossLookup]] = None) -> tuple[YearLossTable, SplitTiming]:
    """Run the first ``floor(split_fraction * N)`` trials on pool A and the rest on pool B.

    Each pool has its own worker count and chunk size.  By default the pools
    run one after the other, so each pool's wall time is what it would take
    with the machine to itself (the situation of two separate devices).  With
    ``concurrent=True`` both pools start together and share the machine.
    """
    if not 0.0 <= split_fraction <= 1.0:
        raise ValueError(f"split_fraction must lie in [0, 1], got {split_fraction}")
    if (cfg_a.mode, cfg_a.precision) != (cfg_b.mode, cfg_b.precision):
        raise ValueError("both pools must use the same mode and precision")
    n = yet.num_trials
    m = int(np.floor(split_fraction * n))
    if lookups is None:
        lookups = build_lookups(portfolio, yet.catalogue_size, cfg_a)
    outs, statuses = _buffers(portfolio, n)

    def pool(cfg, lo, hi, executor=None):
        t0 = time.perf_counter()
        if hi > lo:
            _run_range(portfolio, yet, cfg, lo, hi, outs, statuses, lookups, executor=executor)
        return time.perf_counter() - t0

    if concurrent:
        with ThreadPoolExecutor(cfg_a.worker_count) as ex_a, \
                ThreadPoolExecutor(cfg_b.worker_count) as ex_b, \
                ThreadPoolExecutor(2) as drivers:
            fa = drivers.submit(pool, cfg_a, 0, m, ex_a)
            fb = drivers.submit(pool, cfg_b, m, n, ex_b)
            secs_a, secs_b = fa.result(), fb.result()
    else:
        secs_a = pool(cfg_a, 0, m)
        secs_b = pool(cfg_b, m, n)
    ylt = _assemble(portfolio, yet, outs, statuses)
    return ylt, SplitTiming(float(split_fraction), m, n - m, secs_a, secs_b)


def run_stage(portfolio: Portfolio, yet: YearEventTable, cfg: RunConfig, stage: int,
              lookups: Optional[list[LossLookup]] = None) -> np.ndarray:
    """Run the kernel at an explicit stage and return raw per-layer outputs.

    Used by the benchmark harness for phase decomposition; ``STAGE_LOOKUP``
    outputs are raw mean-loss sums, not trial losses.
    """
    if lookups is None:
        lookups = build_lookups(portfolio, yet.catalogue_size, cfg)
    outs, statuses = _buffers(portfolio, yet.num_trials)
    _run_range(portfolio, yet, cfg, 0, yet.num_trials, outs, statuses, lookups, stage=stage)
    return np.stack(outs)
