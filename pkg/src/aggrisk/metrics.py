"""Risk metrics read off a year loss table.

Quantiles are empirical and never interpolated.  With ``N`` trial losses,
the loss at exceedance probability ``q`` is the ``ceil(N * q)``-th largest,
i.e. the higher order statistic whenever ``N * (1 - q)`` is an integer.
PML at return period ``RP`` uses ``q = 1 / RP`` and TVaR at level ``p``
averages the same ``ceil(N * (1 - p))`` largest losses, so
``tvar(p) >= pml(1 / (1 - p))`` holds by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
import math
from typing import Union

import numpy as np

from .model import YearLossTable

Losses = Union[YearLossTable, np.ndarray, list]


def _exact(x: float) -> Fraction:
    # Use the shortest decimal form so 0.99 means 99/100, not its binary neighbour.
    return Fraction(repr(float(x)))


def trial_losses(ylt: Losses) -> np.ndarray:
    """Per-trial portfolio losses: YLT rows summed over programs and layers."""
    if isinstance(ylt, YearLossTable):
        return ylt.trial_totals()
    losses = np.asarray(ylt, dtype=np.float64).ravel()
    return losses


def _sorted_desc(ylt: Losses) -> np.ndarray:
    losses = trial_losses(ylt)
    if losses.size == 0:
        raise ValueError("year loss table is empty")
    return np.sort(losses)[::-1]


def _tail_count(n: int, exceedance: Fraction) -> int:
    return math.ceil(n * exceedance)


def pml(ylt: Losses, return_period: float) -> float:
    """Probable maximum loss: the ``ceil(N / RP)``-th largest trial loss."""
    if not return_period > 1:
        raise ValueError(f"return_period must exceed 1, got {return_period}")
    desc = _sorted_desc(ylt)
    n = desc.size
    if return_period > n:
        raise ValueError(
            f"return period {return_period} exceeds the {n} trials available"
        )
    k = _tail_count(n, 1 / _exact(return_period))
    return float(desc[k - 1])


def loss_quantile(ylt: Losses, p: float) -> float:
    """Empirical loss quantile at non-exceedance probability ``p``."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    desc = _sorted_desc(ylt)
    k = _tail_count(desc.size, 1 - _exact(p))
    return float(desc[k - 1])


def tvar(ylt: Losses, p: float) -> float:
    """Tail value-at-risk: mean of the ``ceil(N * (1 - p))`` largest trial losses."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    desc = _sorted_desc(ylt)
    k = _tail_count(desc.size, 1 - _exact(p))
    if k < 1:
        raise ValueError("tail is empty")
    return float(desc[:k].mean())


@dataclass(frozen=True)
class ExceedanceCurve:
    losses: np.ndarray
    probabilities: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.losses.tolist(), self.probabilities.tolist()))

    def pml(self, return_period: float) -> float:
        """Loss at the first point whose exceedance probability reaches ``1 / RP``."""
        n = self.losses.size
        if not 1 < return_period <= n:
            raise ValueError(f"return period must lie in (1, {n}], got {return_period}")
        rp = _exact(return_period)
        # first point with rank / N >= 1 / RP, compared in integers
        ranks = np.arange(1, n + 1, dtype=np.int64)
        k = int(np.searchsorted(ranks * rp.numerator, n * rp.denominator, side="left"))
        return float(self.losses[k])


def exceedance_curve(ylt: Losses) -> ExceedanceCurve:
    """Empirical exceedance curve: the rank-``r`` largest loss has probability ``r / N``."""
    desc = _sorted_desc(ylt)
    n = desc.size
    return ExceedanceCurve(desc.copy(), np.arange(1, n + 1) / n)
