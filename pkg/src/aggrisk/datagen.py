"""Seeded synthetic year event tables, XELTs and portfolios.

Every table draws from its own Philox stream, keyed by the seed and a table
tag, so tables can be regenerated independently and in any order.  Loss
marginals are plain uniform ranges; they are synthetic and make no claim to
realism.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
import math

import numpy as np

from .model import EltTerms, Layer, LayerTerms, Portfolio, Program, Xelt, YearEventTable

RNG_ALGORITHM = "numpy-philox4x64-10"

_TAG_YET = 0
_TAG_LAYER = 1
_TAG_XELT = 2

Range = tuple[float, float]


@dataclass(frozen=True)
class GenSpec:
    seed: int = 1
    num_trials: int = 10_000
    events_per_trial: tuple[int, int] = (100, 100)
    catalogue_size: int = 10_000
    xelts_per_layer: int = 16
    events_per_xelt: int = 1_000
    num_programs: int = 1
    layers_per_program: int = 1
    mean_loss_range: Range = (1_000.0, 100_000.0)
    sigma_i_fraction: Range = (0.1, 0.5)
    sigma_c_fraction: Range = (0.05, 0.3)
    max_loss_multiplier: Range = (3.0, 10.0)
    elt_retention_range: Range = (0.0, 2_000.0)
    elt_limit_range: Range = (300_000.0, 1_000_000.0)
    occ_retention_range: Range = (10_000.0, 50_000.0)
    occ_limit_range: Range = (200_000.0, 500_000.0)
    agg_retention_range: Range = (100_000.0, 500_000.0)
    agg_limit_range: Range = (2_000_000.0, 5_000_000.0)

    def __post_init__(self):
        counts = {
            "num_trials": self.num_trials,
            "catalogue_size": self.catalogue_size,
            "xelts_per_layer": self.xelts_per_layer,
            "events_per_xelt": self.events_per_xelt,
            "num_programs": self.num_programs,
            "layers_per_program": self.layers_per_program,
        }
        for name, value in counts.items():
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value}")
        lo, hi = self.events_per_trial
        if not 1 <= lo <= hi:
            raise ValueError(f"events_per_trial must satisfy 1 <= lo <= hi, got {self.events_per_trial}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        for name in ("mean_loss_range", "sigma_i_fraction", "sigma_c_fraction", "max_loss_multiplier",
                     "elt_retention_range", "elt_limit_range", "occ_retention_range",
                     "occ_limit_range", "agg_retention_range", "agg_limit_range"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and 0 <= lo <= hi):
                raise ValueError(f"{name} must be a finite non-negative range, got {(lo, hi)}")
        if self.mean_loss_range[0] <= 0:
            raise ValueError("mean_loss_range must be strictly positive")
        if self.max_loss_multiplier[0] <= 1.0:
            raise ValueError("max_loss_multiplier must exceed 1")
        if self.elt_limit_range[0] <= 0:
            raise ValueError("elt_limit_range must be strictly positive")

    @classmethod
    def desk(cls, **overrides) -> "GenSpec":
        """Desk-scale preset: 10,000 trials x 100 events, one layer of 4 XELTs x 1,000 events."""
        base = dict(num_trials=10_000, events_per_trial=(100, 100), catalogue_size=10_000,
                    xelts_per_layer=4, events_per_xelt=1_000)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)


def _rng(seed: int, *tags: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *tags])))


def _open_uniform(rng: np.random.Generator, n: int) -> np.ndarray:
    # (k + 1/2) / 2^53 never hits 0 or 1
    return (rng.integers(0, 2**53, size=n, dtype=np.int64) + 0.5) / 2.0**53


def _uniform(rng, bounds: Range, size=None):
    lo, hi = bounds
    return rng.uniform(lo, hi, size=size)


def generate_yet(spec: GenSpec) -> YearEventTable:
    rng = _rng(spec.seed, _TAG_YET)
    lo, hi = spec.events_per_trial
    counts = rng.integers(lo, hi + 1, size=spec.num_trials, dtype=np.int64)
    offsets = np.zeros(spec.num_trials + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    n = int(offsets[-1])
    event_ids = rng.integers(1, spec.catalogue_size + 1, size=n, dtype=np.int64)
    timestamps = rng.random(n)
    # Sort timestamps within each trial: trial index is the primary key.
    trial_of = np.repeat(np.arange(spec.num_trials), counts)
    timestamps = timestamps[np.lexsort((timestamps, trial_of))]
    z = _open_uniform(rng, n)
    return YearEventTable(offsets, event_ids, timestamps, z, spec.catalogue_size)


def generate_xelt(spec: GenSpec, program: int = 0, layer: int = 0, index: int = 0) -> Xelt:
    if spec.events_per_xelt > spec.catalogue_size:
        raise ValueError(
            f"events_per_xelt ({spec.events_per_xelt}) exceeds catalogue_size ({spec.catalogue_size})"
        )
    rng = _rng(spec.seed, _TAG_XELT, program, layer, index)
    n = spec.events_per_xelt
    ids = np.sort(rng.choice(spec.catalogue_size, size=n, replace=False)) + 1
    mean = _uniform(rng, spec.mean_loss_range, n)
    sigma_i = mean * _uniform(rng, spec.sigma_i_fraction, n)
    sigma_c = mean * _uniform(rng, spec.sigma_c_fraction, n)
    max_loss = mean * _uniform(rng, spec.max_loss_multiplier, n)
    z_e = _open_uniform(rng, n)
    terms = EltTerms(float(_uniform(rng, spec.elt_retention_range)), float(_uniform(rng, spec.elt_limit_range)))
    return Xelt(ids, mean, sigma_i, sigma_c, max_loss, z_e, terms)


def generate_layer(spec: GenSpec, program: int = 0, layer: int = 0) -> Layer:
    rng = _rng(spec.seed, _TAG_LAYER, program, layer)
    terms = LayerTerms(
        occ_retention=float(_uniform(rng, spec.occ_retention_range)),
        occ_limit=float(_uniform(rng, spec.occ_limit_range)),
        agg_retention=float(_uniform(rng, spec.agg_retention_range)),
        agg_limit=float(_uniform(rng, spec.agg_limit_range)),
    )
    xelts = tuple(generate_xelt(spec, program, layer, j) for j in range(spec.xelts_per_layer))
    return Layer(xelts, terms)


def generate_portfolio(spec: GenSpec) -> Portfolio:
    return Portfolio(tuple(
        Program(tuple(generate_layer(spec, p, l) for l in range(spec.layers_per_program)))
        for p in range(spec.num_programs)
    ))
