import math

from hypothesis import given, strategies as st
import numpy as np
import pytest

from aggrisk.model import ExtendedEventLoss
from aggrisk.stats import normal_quantile
from aggrisk.uncertainty import (
    CLAMP_FACTOR,
    beta_parameters,
    combine_std_dev,
    sample_secondary_loss,
    sample_secondary_losses,
)

from oracles import beta_mean_quad, inverse_beta_oracle, normal_cdf_quad

# frozen from tests/oracles.py
Z_COMBINED = 0.7602498970789104        # normal cdf of quantile(0.8413447) / sqrt(2) by quadrature
LOSS_50_25_100_AT_09 = 84.35244130662709  # 100 * beta(1.5, 1.5) quantile at 0.9 by bisection

unit = st.floats(1e-9, 1 - 1e-9)
spread = st.floats(1e-3, 1e4)


def record(mean, si, sc, mx, z_e=0.5, event_id=1):
    return ExtendedEventLoss(event_id, mean, si, sc, mx, z_e)


def test_frozen_values_match_oracles():
    v = normal_quantile(0.8413447) * 0.5 / math.sqrt(0.5)
    assert normal_cdf_quad(v) == pytest.approx(Z_COMBINED, rel=1e-13)
    assert 100 * inverse_beta_oracle(0.9, 1.5, 1.5) == pytest.approx(LOSS_50_25_100_AT_09, rel=1e-12)


@given(unit, unit, spread)
def test_combine_sigma_i_zero_returns_z_e(zp, ze, sc):
    assert combine_std_dev(zp, ze, 0.0, sc).z == pytest.approx(ze, abs=1e-9)


@given(unit, unit, spread)
def test_combine_sigma_c_zero_returns_z_prog(zp, ze, si):
    assert combine_std_dev(zp, ze, si, 0.0).z == pytest.approx(zp, abs=1e-9)


def test_combine_example():
    d = combine_std_dev(0.8413447, 0.5, 1.0, 1.0)
    assert d.sigma == 2.0
    # weights 1/2 each: LC = 0.5 * 1 + 0.5 * 0, renormalised by sqrt(0.5)
    assert d.v == pytest.approx(0.70710678, abs=1e-6)
    assert d.z == pytest.approx(Z_COMBINED, abs=1e-7)


def test_combine_rejects_bad_input():
    for args in ((0.0, 0.5, 1, 1), (0.5, 1.0, 1, 1), (0.5, 0.5, -1, 1), (0.5, 0.5, 0, 0)):
        with pytest.raises(ValueError):
            combine_std_dev(*args)


@given(unit, unit, spread, spread)
def test_combine_is_a_probability(zp, ze, si, sc):
    assert 0.0 <= combine_std_dev(zp, ze, si, sc).z <= 1.0


def test_beta_parameters_examples():
    p = beta_parameters(50, 25, 100)
    assert (p.mu_beta, p.sigma_beta, p.sigma_beta_max) == (0.5, 0.25, 0.5)
    assert p.alpha == pytest.approx(1.5) and p.beta == pytest.approx(1.5)
    p = beta_parameters(20, 10, 100)
    assert p.alpha == pytest.approx(3.0) and p.beta == pytest.approx(12.0)


def test_beta_parameters_clamp():
    p = beta_parameters(50, 60, 100)
    assert p.sigma_beta == CLAMP_FACTOR * 0.5
    assert p.alpha == pytest.approx(1.00015e-4, rel=1e-5)
    assert p.alpha == p.beta
    assert beta_mean_quad(p.alpha, p.beta) == pytest.approx(p.mu_beta, rel=1e-9)
    q = beta_parameters(20, 40, 100)
    assert beta_mean_quad(q.alpha, q.beta) == pytest.approx(0.2, rel=1e-9)


def test_beta_parameters_clamp_applies_at_equality():
    p = beta_parameters(50, 50, 100)
    assert p.sigma_beta == CLAMP_FACTOR * p.sigma_beta_max


@given(st.floats(0.01, 0.99), st.floats(0.01, 2.0))
def test_beta_parameters_preserve_mean(mu, rel_sd):
    p = beta_parameters(mu * 100.0, rel_sd * math.sqrt(mu * (1 - mu)) * 100.0, 100.0)
    assert p.alpha > 0 and p.beta > 0
    assert p.alpha / (p.alpha + p.beta) == pytest.approx(mu, rel=1e-9)


@pytest.mark.parametrize("args", [(0, 1, 10), (10, 1, 10), (11, 1, 10), (5, 0, 10)])
def test_beta_parameters_reject_degenerate(args):
    with pytest.raises(ValueError):
        beta_parameters(*args)


def test_secondary_loss_degenerate_rows():
    assert sample_secondary_loss(record(75, 0, 0, 100), 0.3) == 75
    assert sample_secondary_loss(record(0, 5, 5, 100), 0.3) == 0
    assert sample_secondary_loss(record(100, 5, 5, 100), 0.3) == 100


def test_secondary_loss_symmetric_median():
    # sigma_c = 0 so the combined draw is z_prog_e itself
    assert sample_secondary_loss(record(50, 10, 0, 100), 0.5) == pytest.approx(50.0, abs=1e-9)


def test_secondary_loss_example():
    loss = sample_secondary_loss(record(50, 25, 0, 100, z_e=0.123), 0.9)
    assert loss == pytest.approx(LOSS_50_25_100_AT_09, abs=1e-4)


@given(st.floats(1.0, 99.0), st.floats(0.0, 80.0), st.floats(0.0, 80.0), unit, unit)
def test_secondary_loss_bounded(mean, si, sc, ze, zp):
    loss = sample_secondary_loss(record(mean, si, sc, 100.0, z_e=ze), zp)
    assert 0.0 <= loss <= 100.0


@given(st.floats(1.0, 99.0), spread, unit, unit, unit)
def test_sigma_i_zero_ignores_z_prog(mean, sc, ze, zp1, zp2):
    r = record(mean, 0.0, sc, 100.0, z_e=ze)
    assert sample_secondary_loss(r, zp1) == sample_secondary_loss(r, zp2)


@given(st.floats(1.0, 99.0), spread, unit, unit, unit)
def test_sigma_c_zero_ignores_z_e(mean, si, zp, ze1, ze2):
    a = sample_secondary_loss(record(mean, si, 0.0, 100.0, z_e=ze1), zp)
    b = sample_secondary_loss(record(mean, si, 0.0, 100.0, z_e=ze2), zp)
    assert a == b


@given(st.floats(1.0, 99.0), st.floats(1.0, 60.0), st.floats(0.0, 60.0), unit, unit, unit)
def test_secondary_loss_monotone_in_z_prog(mean, si, sc, ze, zp1, zp2):
    lo, hi = sorted((zp1, zp2))
    r = record(mean, si, sc, 100.0, z_e=ze)
    assert sample_secondary_loss(r, lo) <= sample_secondary_loss(r, hi) * (1 + 2e-6) + 1e-300


def test_vectorised_matches_scalar():
    rng = np.random.default_rng(3)
    n = 200
    mean = rng.uniform(1, 99, n)
    si = rng.uniform(0, 40, n)
    sc = rng.uniform(0, 40, n)
    ze = rng.uniform(0.01, 0.99, n)
    zp = rng.uniform(0.01, 0.99, n)
    out = sample_secondary_losses(mean, si, sc, 100.0, ze, zp)
    for k in range(n):
        r = record(mean[k], si[k], sc[k], 100.0, z_e=ze[k])
        assert out[k] == sample_secondary_loss(r, zp[k])


def test_uniform_draws_give_the_fitted_mean():
    # independent uniform z_prog_e and z_e yield a uniform combined draw
    rng = np.random.default_rng(11)
    n = 100_000
    zp = rng.uniform(size=n)
    ze = rng.uniform(size=n)
    losses = sample_secondary_losses(30.0, 8.0, 4.0, 100.0, ze, zp)
    p = beta_parameters(30.0, 12.0, 100.0)
    sd = 100.0 * math.sqrt(p.alpha * p.beta / ((p.alpha + p.beta) ** 2 * (p.alpha + p.beta + 1)))
    assert abs(losses.mean() - 30.0) <= 3 * sd / math.sqrt(n)
