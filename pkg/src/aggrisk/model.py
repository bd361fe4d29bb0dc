"""Input and output tables of aggregate risk analysis, plus the financial-term operators.

Large tables (the year event table, event loss tables, year loss tables) are
stored column-wise in numpy arrays so the engine can hand them straight to
compiled kernels; record-level dataclasses are available for inspection and
for building small inputs by hand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Iterable, Iterator, Optional, Sequence

import numba as nb
import numpy as np


@nb.njit(cache=True, nogil=True)
def _apply_terms(loss, retention, limit):
    return min(max(loss - retention, 0.0), limit)


# ---------------------------------------------------------------------------
# Year event table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EventOccurrence:
    event_id: int
    timestamp: float
    z_prog_e: float


@dataclass(frozen=True)
class Trial:
    trial_id: int
    occurrences: tuple[EventOccurrence, ...]

    def __post_init__(self):
        object.__setattr__(self, "occurrences", tuple(self.occurrences))
        ts = [o.timestamp for o in self.occurrences]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"trial {self.trial_id}: occurrences must be sorted by timestamp")


class YearEventTable:
    """Pre-simulated trials in compressed-row layout.

    Occurrences of trial ``i`` live at ``offsets[i]:offsets[i + 1]`` in the
    ``event_ids``, ``timestamps`` and ``z_prog_e`` columns.  Trial ids are the
    row positions ``0..n-1``.
    """

    def __init__(self, offsets, event_ids, timestamps, z_prog_e, catalogue_size: int,
                 validate: bool = True):
        self.offsets = np.ascontiguousarray(offsets, dtype=np.int64)
        self.event_ids = np.ascontiguousarray(event_ids, dtype=np.int64)
        self.timestamps = np.ascontiguousarray(timestamps, dtype=np.float64)
        self.z_prog_e = np.ascontiguousarray(z_prog_e, dtype=np.float64)
        self.catalogue_size = int(catalogue_size)
        for arr in (self.offsets, self.event_ids, self.timestamps, self.z_prog_e):
            arr.setflags(write=False)
        if validate:
            self.validate()

    @classmethod
    def from_trials(cls, trials: Sequence[Trial], catalogue_size: int) -> "YearEventTable":
        for i, t in enumerate(trials):
            if t.trial_id != i:
                raise ValueError(f"trial ids must be contiguous from 0; position {i} has {t.trial_id}")
        counts = [len(t.occurrences) for t in trials]
        offsets = np.zeros(len(trials) + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        occ = [o for t in trials for o in t.occurrences]
        return cls(
            offsets,
            np.array([o.event_id for o in occ], dtype=np.int64),
            np.array([o.timestamp for o in occ], dtype=np.float64),
            np.array([o.z_prog_e for o in occ], dtype=np.float64),
            catalogue_size,
        )

    def validate(self) -> None:
        if self.catalogue_size < 1:
            raise ValueError("catalogue_size must be >= 1")
        off = self.offsets
        if off.ndim != 1 or off.size < 1 or off[0] != 0 or np.any(np.diff(off) < 0):
            raise ValueError("offsets must start at 0 and be non-decreasing")
        n = int(off[-1])
        if not (self.event_ids.size == self.timestamps.size == self.z_prog_e.size == n):
            raise ValueError("occurrence columns must all have offsets[-1] entries")
        if n == 0:
            return
        if self.event_ids.min() < 1 or self.event_ids.max() > self.catalogue_size:
            raise ValueError(f"event ids must lie in [1, {self.catalogue_size}]")
        if not np.all(self.timestamps >= 0.0):
            raise ValueError("timestamps must be non-negative")
        if not np.all((self.z_prog_e > 0.0) & (self.z_prog_e < 1.0)):
            raise ValueError("z_prog_e draws must lie in the open interval (0, 1)")
        # Descending steps are only allowed where a new trial starts.
        descending = np.flatnonzero(np.diff(self.timestamps) < 0) + 1
        if descending.size and not np.all(np.isin(descending, off)):
            raise ValueError("occurrences within a trial must be sorted by timestamp")

    @property
    def num_trials(self) -> int:
        return self.offsets.size - 1

    def __len__(self) -> int:
        return self.num_trials

    def trial(self, i: int) -> Trial:
        lo, hi = int(self.offsets[i]), int(self.offsets[i + 1])
        return Trial(
            trial_id=i,
            occurrences=tuple(
                EventOccurrence(int(e), float(t), float(z))
                for e, t, z in zip(self.event_ids[lo:hi], self.timestamps[lo:hi], self.z_prog_e[lo:hi])
            ),
        )

    def __iter__(self) -> Iterator[Trial]:
        return (self.trial(i) for i in range(self.num_trials))

    @property
    def trials(self) -> list[Trial]:
        return list(self)

    def head(self, n: int) -> "YearEventTable":
        """The first ``n`` trials as a new table."""
        n = min(n, self.num_trials)
        stop = int(self.offsets[n])
        return YearEventTable(self.offsets[: n + 1], self.event_ids[:stop], self.timestamps[:stop],
                              self.z_prog_e[:stop], self.catalogue_size, validate=False)

    def __eq__(self, other):
        if not isinstance(other, YearEventTable):
            return NotImplemented
        return self.catalogue_size == other.catalogue_size and all(
            np.array_equal(a, b) for a, b in zip(self._columns(), other._columns())
        )

    def _columns(self):
        return self.offsets, self.event_ids, self.timestamps, self.z_prog_e


# ---------------------------------------------------------------------------
# Event loss tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExtendedEventLoss:
    event_id: int
    mean_loss: float
    sigma_i: float
    sigma_c: float
    max_loss: float
    z_e: float

    def __post_init__(self):
        if self.event_id < 1:
            raise ValueError(f"event_id must be >= 1, got {self.event_id}")
        if not 0.0 <= self.mean_loss <= self.max_loss or self.max_loss <= 0.0:
            raise ValueError(
                f"event {self.event_id}: need 0 <= mean_loss <= max_loss and max_loss > 0"
            )
        if self.sigma_i < 0.0 or self.sigma_c < 0.0:
            raise ValueError(f"event {self.event_id}: standard deviations must be >= 0")
        if not 0.0 < self.z_e < 1.0:
            raise ValueError(f"event {self.event_id}: z_e must lie in (0, 1)")


@dataclass(frozen=True)
class EltTerms:
    """Per-table financial terms: a retention and a limit on each event loss."""

    retention: float = 0.0
    limit: float = math.inf

    def __post_init__(self):
        if self.retention < 0.0 or self.limit < 0.0:
            raise ValueError("ELT retention and limit must be non-negative")


_XELT_COLUMNS = ("event_id", "mean_loss", "sigma_i", "sigma_c", "max_loss", "z_e")


class Xelt:
    """Extended event loss table stored column-wise."""

    columns = _XELT_COLUMNS

    def __init__(self, event_id, mean_loss, sigma_i, sigma_c, max_loss, z_e,
                 terms: EltTerms = EltTerms(), validate: bool = True):
        self.event_id = np.ascontiguousarray(event_id, dtype=np.int64)
        self.mean_loss = np.ascontiguousarray(mean_loss, dtype=np.float64)
        self.sigma_i = np.ascontiguousarray(sigma_i, dtype=np.float64)
        self.sigma_c = np.ascontiguousarray(sigma_c, dtype=np.float64)
        self.max_loss = np.ascontiguousarray(max_loss, dtype=np.float64)
        self.z_e = np.ascontiguousarray(z_e, dtype=np.float64)
        self.terms = terms
        for name in _XELT_COLUMNS:
            getattr(self, name).setflags(write=False)
        if validate:
            self.validate()

    @classmethod
    def from_records(cls, records: Iterable[ExtendedEventLoss], terms: EltTerms = EltTerms()) -> "Xelt":
        records = list(records)
        cols = {name: [getattr(r, name) for r in records] for name in _XELT_COLUMNS}
        return cls(terms=terms, **cols)

    def validate(self) -> None:
        n = self.event_id.size
        if any(getattr(self, c).shape != (n,) for c in _XELT_COLUMNS):
            raise ValueError("XELT columns must be 1-d and of equal length")
        if n and self.event_id.min() < 1:
            raise ValueError("event ids must be >= 1")
        if np.unique(self.event_id).size != n:
            raise ValueError("event ids must be unique within one XELT")
        ok = (
            (self.mean_loss >= 0.0)
            & (self.mean_loss <= self.max_loss)
            & (self.max_loss > 0.0)
            & (self.sigma_i >= 0.0)
            & (self.sigma_c >= 0.0)
            & (self.z_e > 0.0)
            & (self.z_e < 1.0)
        )
        if not np.all(ok):
            bad = int(self.event_id[np.argmin(ok)])
            raise ValueError(f"XELT record for event {bad} violates record invariants")

    def __len__(self) -> int:
        return self.event_id.size

    def record_at(self, row: int) -> ExtendedEventLoss:
        return ExtendedEventLoss(*(getattr(self, c)[row].item() for c in _XELT_COLUMNS))

    @property
    def records(self) -> list[ExtendedEventLoss]:
        return [self.record_at(i) for i in range(len(self))]

    def get(self, event_id: int) -> Optional[ExtendedEventLoss]:
        rows = np.flatnonzero(self.event_id == event_id)
        return self.record_at(int(rows[0])) if rows.size else None

    def __eq__(self, other):
        if not isinstance(other, Xelt):
            return NotImplemented
        return self.terms == other.terms and all(
            np.array_equal(getattr(self, c), getattr(other, c)) for c in _XELT_COLUMNS
        )


# ---------------------------------------------------------------------------
# Contract structure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LayerTerms:
    occ_retention: float = 0.0
    occ_limit: float = math.inf
    agg_retention: float = 0.0
    agg_limit: float = math.inf

    def __post_init__(self):
        if min(self.occ_retention, self.occ_limit, self.agg_retention, self.agg_limit) < 0.0:
            raise ValueError("layer terms must be non-negative")


@dataclass(frozen=True)
class Layer:
    xelts: tuple[Xelt, ...]
    terms: LayerTerms = field(default_factory=LayerTerms)

    def __post_init__(self):
        object.__setattr__(self, "xelts", tuple(self.xelts))
        if not self.xelts:
            raise ValueError("a layer must cover at least one XELT")


@dataclass(frozen=True)
class Program:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError("a program must contain at least one layer")


@dataclass(frozen=True)
class Portfolio:
    programs: tuple[Program, ...]

    def __post_init__(self):
        object.__setattr__(self, "programs", tuple(self.programs))
        if not self.programs:
            raise ValueError("a portfolio must contain at least one program")

    @classmethod
    def single(cls, layer: Layer) -> "Portfolio":
        return cls((Program((layer,)),))


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


class YearLossTable:
    """One loss per (program, layer, trial), rows ordered by program, layer, trial."""

    def __init__(self, program, layer, trial_id, loss):
        self.program = np.ascontiguousarray(program, dtype=np.int64)
        self.layer = np.ascontiguousarray(layer, dtype=np.int64)
        self.trial_id = np.ascontiguousarray(trial_id, dtype=np.int64)
        self.loss = np.ascontiguousarray(loss, dtype=np.float64)
        n = self.loss.size
        if not (self.program.size == self.layer.size == self.trial_id.size == n):
            raise ValueError("YLT columns must have equal length")
        if n and not np.all(self.loss >= 0.0):
            raise ValueError("trial losses must be non-negative")

    def __len__(self) -> int:
        return self.loss.size

    def trial_totals(self, program: Optional[int] = None, layer: Optional[int] = None) -> np.ndarray:
        """Per-trial loss summed over the selected programs and layers."""
        mask = np.ones(len(self), dtype=bool)
        if program is not None:
            mask &= self.program == program
        if layer is not None:
            mask &= self.layer == layer
        if not mask.any():
            raise ValueError("no YLT rows match the selection")
        ids = self.trial_id[mask]
        totals = np.zeros(int(ids.max()) + 1)
        np.add.at(totals, ids, self.loss[mask])
        return totals

    def __eq__(self, other):
        if not isinstance(other, YearLossTable):
            return NotImplemented
        return all(
            np.array_equal(a, b)
            for a, b in zip(
                (self.program, self.layer, self.trial_id, self.loss),
                (other.program, other.layer, other.trial_id, other.loss),
            )
        )

    def to_bytes(self) -> bytes:
        """Exact binary image of the table, used for determinism checks."""
        return b"".join(a.tobytes() for a in (self.program, self.layer, self.trial_id, self.loss))


# ---------------------------------------------------------------------------
# Financial terms
# ---------------------------------------------------------------------------


def apply_elt_terms(loss: float, terms: EltTerms) -> float:
    return _apply_terms(float(loss), terms.retention, terms.limit)


def apply_occurrence_terms(loss: float, terms: LayerTerms) -> float:
    return _apply_terms(float(loss), terms.occ_retention, terms.occ_limit)


def apply_aggregate_terms(cumulative: float, terms: LayerTerms) -> float:
    return _apply_terms(float(cumulative), terms.agg_retention, terms.agg_limit)
