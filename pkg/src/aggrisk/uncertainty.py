"""Secondary uncertainty: turn an event's loss distribution into a sampled loss."""

from dataclasses import dataclass
import math

import numba as nb
import numpy as np

from .model import ExtendedEventLoss
from .stats import (
    STATUS_OK,
    IterationLimitError,
    Precision,
    _inverse_beta_cdf,
    _normal_cdf,
    _normal_quantile,
)

# Fraction of the largest admissible beta standard deviation used when the
# requested one is too wide for a beta distribution with the given mean.
CLAMP_FACTOR = 0.9999


@dataclass(frozen=True)
class CombinedDraw:
    z: float
    v: float
    sigma: float


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float
    mu_beta: float
    sigma_beta: float
    sigma_beta_max: float


@nb.njit(cache=True, nogil=True)
def _combine_std_dev(z_prog_e, z_e, sigma_i, sigma_c):
    sigma = sigma_i + sigma_c
    wi = sigma_i / sigma
    wc = sigma_c / sigma
    lc = _normal_quantile(z_prog_e) * wi + _normal_quantile(z_e) * wc
    v = lc / math.sqrt(wi * wi + wc * wc)
    return _normal_cdf(v), v, sigma


@nb.njit(cache=True, nogil=True)
def _beta_parameters(mean_loss, sigma, max_loss):
    mu = mean_loss / max_loss
    sd = sigma / max_loss
    sd_max = math.sqrt(mu * (1.0 - mu))
    if sd >= sd_max:
        sd = CLAMP_FACTOR * sd_max
    r = sd_max / sd
    factor = r * r - 1.0
    return mu * factor, (1.0 - mu) * factor, mu, sd, sd_max


@nb.njit(cache=True, nogil=True)
def _secondary_loss(mean_loss, sigma_i, sigma_c, max_loss, z_e, z_prog_e, tol, max_iter):
    """Return ``(loss, status)``; degenerate rows short-circuit to their forced loss."""
    sigma = sigma_i + sigma_c
    if sigma <= 0.0 or mean_loss <= 0.0 or mean_loss >= max_loss:
        return mean_loss, STATUS_OK
    z, _, _ = _combine_std_dev(z_prog_e, z_e, sigma_i, sigma_c)
    a, b, _, _, _ = _beta_parameters(mean_loss, sigma, max_loss)
    if not math.isfinite(a + b):
        # spread so small the shapes overflow: the beta is a point mass
        return mean_loss, STATUS_OK
    x, _, status = _inverse_beta_cdf(z, a, b, tol, max_iter)
    return max_loss * x, status


@nb.njit(cache=True, nogil=True)
def _secondary_loss_batch(mean_loss, sigma_i, sigma_c, max_loss, z_e, z_prog_e, tol, max_iter, out):
    bad = 0
    for k in range(out.shape[0]):
        loss, status = _secondary_loss(
            mean_loss[k], sigma_i[k], sigma_c[k], max_loss[k], z_e[k], z_prog_e[k], tol, max_iter
        )
        out[k] = loss
        if status != STATUS_OK:
            bad += 1
    return bad


def combine_std_dev(z_prog_e, z_e, sigma_i, sigma_c) -> CombinedDraw:
    """Merge the program- and event-level draws into one uniform draw.

    Both draws are mapped to standard normals, mixed with weights
    ``sigma_i/sigma`` and ``sigma_c/sigma`` (``sigma = sigma_i + sigma_c``),
    renormalised to unit variance and mapped back through the normal CDF.
    """
    for name, z in (("z_prog_e", z_prog_e), ("z_e", z_e)):
        if not 0.0 < z < 1.0:
            raise ValueError(f"{name} must lie in (0, 1), got {z}")
    if sigma_i < 0.0 or sigma_c < 0.0:
        raise ValueError("standard deviations must be non-negative")
    if sigma_i + sigma_c <= 0.0:
        raise ValueError("sigma_i and sigma_c are both zero; the draw is undefined")
    z, v, sigma = _combine_std_dev(float(z_prog_e), float(z_e), float(sigma_i), float(sigma_c))
    return CombinedDraw(z=z, v=v, sigma=sigma)


def beta_parameters(mean_loss, sigma, max_loss) -> BetaParams:
    """Moment-match a beta distribution on ``[0, max_loss]``.

    When ``sigma / max_loss`` reaches the largest standard deviation a beta
    with that mean allows, it is pulled back to ``CLAMP_FACTOR`` of that bound.
    """
    if not 0.0 < mean_loss < max_loss:
        raise ValueError(
            f"need 0 < mean_loss < max_loss, got mean_loss={mean_loss}, max_loss={max_loss}"
        )
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return BetaParams(*_beta_parameters(float(mean_loss), float(sigma), float(max_loss)))


def sample_secondary_loss(
    record: ExtendedEventLoss, z_prog_e: float, prec: Precision = Precision()
) -> float:
    """Loss for one event occurrence under secondary uncertainty.

    Rows without spread return their mean; rows whose mean sits on 0 or on
    ``max_loss`` return that bound.
    """
    if not 0.0 < z_prog_e < 1.0:
        raise ValueError(f"z_prog_e must lie in (0, 1), got {z_prog_e}")
    loss, status = _secondary_loss(
        record.mean_loss,
        record.sigma_i,
        record.sigma_c,
        record.max_loss,
        record.z_e,
        float(z_prog_e),
        prec.relative_tolerance,
        prec.max_iterations,
    )
    if status != STATUS_OK:
        raise IterationLimitError(
            f"secondary loss for event {record.event_id} did not converge",
            last_iterate=loss / record.max_loss,
            iterations=prec.max_iterations,
        )
    return loss


def sample_secondary_losses(mean_loss, sigma_i, sigma_c, max_loss, z_e, z_prog_e,
                            prec: Precision = Precision()) -> np.ndarray:
    """Vectorised :func:`sample_secondary_loss` over aligned arrays (broadcast)."""
    arrays = np.broadcast_arrays(
        *(np.asarray(a, dtype=np.float64) for a in (mean_loss, sigma_i, sigma_c, max_loss, z_e, z_prog_e))
    )
    arrays = [np.ascontiguousarray(a.ravel()) for a in arrays]
    out = np.empty(arrays[0].shape[0])
    bad = _secondary_loss_batch(*arrays, prec.relative_tolerance, prec.max_iterations, out)
    if bad:
        raise IterationLimitError(
            f"{bad} secondary-loss samples did not converge", last_iterate=np.nan,
            iterations=prec.max_iterations,
        )
    return out
