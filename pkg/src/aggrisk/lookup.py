"""Event-id to loss-record indexes for the XELTs of one layer.

All backends resolve ``(xelt_index, event_id)`` to a row in the layer's
stacked record columns, or to ``ABSENT``.  Which structure answers the query
is the only difference between them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numba as nb
import numpy as np

from .model import ExtendedEventLoss, Layer

ABSENT = -1

DIRECT_ACCESS = 0
SORTED_BINARY = 1
HASHED = 2

BACKENDS = {"direct_access": DIRECT_ACCESS, "sorted_binary": SORTED_BINARY, "hashed": HASHED}

SLOT_BYTES = 4  # int32 row index per direct-access slot
DEFAULT_MEMORY_BUDGET = 2 << 30

_FIB = np.uint64(11400714819323198485)


class MemoryBudgetError(MemoryError):
    """A direct-access table would exceed the configured memory budget."""


@nb.njit(cache=True, nogil=True, inline="always")
def _resolve(kind, j, e, index, values, bounds, aux):
    if kind == DIRECT_ACCESS:
        # aux holds (xelt stride, event stride); event ids are 1-based.
        return np.int64(index[j * aux[0] + (e - 1) * aux[1]])
    if kind == SORTED_BINARY:
        lo = bounds[j]
        hi = bounds[j + 1]
        while lo < hi:
            mid = (lo + hi) >> 1
            if index[mid] < e:
                lo = mid + 1
            else:
                hi = mid
        if lo < bounds[j + 1] and index[lo] == e:
            return values[lo]
        return -1
    # Open addressing with linear probing; aux[j] is log2 of the capacity.
    base = bounds[j]
    mask = (bounds[j + 1] - base) - 1
    slot = np.int64((np.uint64(e) * _FIB) >> np.uint64(64 - aux[j])) & mask
    while True:
        key = index[base + slot]
        if key == e:
            return values[base + slot]
        if key == 0:
            return -1
        slot = (slot + 1) & mask


@nb.njit(cache=True)
def _fill_hash(keys, values, base, bits, ids, rows):
    mask = (1 << bits) - 1
    for k in range(ids.shape[0]):
        e = ids[k]
        slot = np.int64((np.uint64(e) * _FIB) >> np.uint64(64 - bits)) & mask
        while keys[base + slot] != 0:
            slot = (slot + 1) & mask
        keys[base + slot] = e
        values[base + slot] = rows[k]


@nb.njit(cache=True, nogil=True)
def _resolve_many(kind, xelt_idx, event_ids, index, values, bounds, aux, out):
    for k in range(out.shape[0]):
        out[k] = _resolve(kind, xelt_idx[k], event_ids[k], index, values, bounds, aux)


@dataclass(frozen=True, eq=False)
class LossLookup:
    """Resolved layer data ready for the compiled kernels."""

    backend: str
    catalogue_size: int
    n_xelts: int
    # stacked record columns, one row per XELT record
    mean_loss: np.ndarray
    sigma_i: np.ndarray
    sigma_c: np.ndarray
    max_loss: np.ndarray
    z_e: np.ndarray
    event_id: np.ndarray
    elt_retention: np.ndarray
    elt_limit: np.ndarray
    # backend structure
    index: np.ndarray
    values: np.ndarray
    bounds: np.ndarray
    aux: np.ndarray

    @property
    def kind(self) -> int:
        return BACKENDS[self.backend]

    @property
    def nbytes(self) -> int:
        return self.index.nbytes + self.values.nbytes + self.bounds.nbytes + self.aux.nbytes

    def resolve(self, xelt_index, event_ids) -> np.ndarray:
        """Stacked row for each ``(xelt_index, event_id)`` pair, ``ABSENT`` if missing."""
        xi, ev = np.broadcast_arrays(np.asarray(xelt_index, dtype=np.int64),
                                     np.asarray(event_ids, dtype=np.int64))
        xi = np.ascontiguousarray(xi.ravel())
        ev = np.ascontiguousarray(ev.ravel())
        if ev.size and (ev.min() < 1 or ev.max() > self.catalogue_size):
            raise ValueError(f"event ids must lie in [1, {self.catalogue_size}]")
        if xi.size and (xi.min() < 0 or xi.max() >= self.n_xelts):
            raise ValueError(f"xelt index must lie in [0, {self.n_xelts})")
        out = np.empty(ev.size, dtype=np.int64)
        _resolve_many(self.kind, xi, ev, self.index, self.values, self.bounds, self.aux, out)
        return out

    def record(self, xelt_index: int, event_id: int) -> Optional[ExtendedEventLoss]:
        row = int(self.resolve(xelt_index, event_id)[0])
        if row == ABSENT:
            return None
        return ExtendedEventLoss(
            int(self.event_id[row]), float(self.mean_loss[row]), float(self.sigma_i[row]),
            float(self.sigma_c[row]), float(self.max_loss[row]), float(self.z_e[row]),
        )


def direct_access_slots(catalogue_size: int, n_xelts: int) -> int:
    return int(catalogue_size) * int(n_xelts)


def direct_access_bytes(catalogue_size: int, n_xelts: int) -> int:
    return direct_access_slots(catalogue_size, n_xelts) * SLOT_BYTES


def build_loss_lookup(
    layer: Layer,
    catalogue_size: int,
    backend: str = "direct_access",
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
    combined: bool = False,
) -> LossLookup:
    """Index the XELTs of ``layer`` for event lookup.

    ``combined`` interleaves all XELTs of a direct-access table into one
    event-major table instead of one table per XELT; it exists for
    benchmarking only.

    Raises
    ------
    ValueError
        Unknown backend, or an event id outside ``[1, catalogue_size]``.
    MemoryBudgetError
        The direct-access table would need more than ``memory_budget`` bytes.
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown lookup backend {backend!r}; choose from {sorted(BACKENDS)}")
    if combined and backend != "direct_access":
        raise ValueError("the combined layout only applies to the direct_access backend")
    xelts = layer.xelts
    n_x = len(xelts)
    for j, x in enumerate(xelts):
        if len(x) and (x.event_id.min() < 1 or x.event_id.max() > catalogue_size):
            raise ValueError(f"XELT {j} has event ids outside [1, {catalogue_size}]")

    sizes = np.array([len(x) for x in xelts], dtype=np.int64)
    starts = np.zeros(n_x + 1, dtype=np.int64)
    np.cumsum(sizes, out=starts[1:])
    stacked = {
        name: np.concatenate([getattr(x, name) for x in xelts])
        for name in ("event_id", "mean_loss", "sigma_i", "sigma_c", "max_loss", "z_e")
    }
    rows = [np.arange(starts[j], starts[j + 1], dtype=np.int64) for j in range(n_x)]

    if backend == "direct_access":
        need = direct_access_bytes(catalogue_size, n_x)
        if need > memory_budget:
            raise MemoryBudgetError(
                f"direct-access table needs {need} bytes "
                f"({direct_access_slots(catalogue_size, n_x)} slots), over the "
                f"{memory_budget}-byte budget; use the 'sorted_binary' or 'hashed' backend"
            )
        index = np.full(direct_access_slots(catalogue_size, n_x), ABSENT, dtype=np.int32)
        aux = np.array([1, n_x] if combined else [catalogue_size, 1], dtype=np.int64)
        for j, x in enumerate(xelts):
            index[j * aux[0] + (x.event_id - 1) * aux[1]] = rows[j]
        values = np.empty(0, dtype=np.int64)
        bounds = np.zeros(n_x + 1, dtype=np.int64)
    elif backend == "sorted_binary":
        keys, vals = [], []
        for j, x in enumerate(xelts):
            order = np.argsort(x.event_id, kind="stable")
            keys.append(x.event_id[order])
            vals.append(rows[j][order])
        index = np.concatenate(keys).astype(np.int64)
        values = np.concatenate(vals).astype(np.int64)
        bounds = starts.copy()
        aux = np.zeros(n_x, dtype=np.int64)
    else:
        bits = np.array([max(3, int(2 * max(s, 1) - 1).bit_length()) for s in sizes], dtype=np.int64)
        caps = np.left_shift(np.int64(1), bits)
        bounds = np.zeros(n_x + 1, dtype=np.int64)
        np.cumsum(caps, out=bounds[1:])
        index = np.zeros(int(bounds[-1]), dtype=np.int64)
        values = np.full(int(bounds[-1]), ABSENT, dtype=np.int64)
        for j, x in enumerate(xelts):
            _fill_hash(index, values, bounds[j], bits[j], x.event_id, rows[j])
        aux = bits

    return LossLookup(
        backend=backend,
        catalogue_size=int(catalogue_size),
        n_xelts=n_x,
        mean_loss=stacked["mean_loss"],
        sigma_i=stacked["sigma_i"],
        sigma_c=stacked["sigma_c"],
        max_loss=stacked["max_loss"],
        z_e=stacked["z_e"],
        event_id=stacked["event_id"],
        elt_retention=np.array([x.terms.retention for x in xelts], dtype=np.float64),
        elt_limit=np.array([x.terms.limit for x in xelts], dtype=np.float64),
        index=index,
        values=values,
        bounds=bounds,
        aux=aux,
    )
