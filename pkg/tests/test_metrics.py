from hypothesis import given, strategies as st
import numpy as np
import pytest

from aggrisk.metrics import exceedance_curve, loss_quantile, pml, trial_losses, tvar
from aggrisk.model import YearLossTable

TENS = np.arange(0, 1000, 10, dtype=float)


def brute_pml(losses, rp):
    # order statistic by explicit counting: smallest x with #(loss >= x) >= N / RP
    xs = sorted(losses)
    n = len(xs)
    for x in reversed(xs):
        if sum(v >= x for v in xs) * rp >= n:
            return x


def test_pml_examples():
    assert pml(TENS, 100) == 990
    assert pml(TENS, 2) == 500
    assert pml(TENS, 2) == brute_pml(TENS.tolist(), 2)
    assert pml(np.full(50, 7.5), 10) == 7.5


def test_pml_rejects_bad_return_period():
    with pytest.raises(ValueError):
        pml(TENS, 101)
    with pytest.raises(ValueError):
        pml(TENS, 1)
    with pytest.raises(ValueError):
        pml([], 2)


def test_tvar_examples():
    assert tvar([100, 200, 300, 400], 0.5) == 350
    assert tvar([100, 200, 300, 400], 0.8) == 400
    with pytest.raises(ValueError):
        tvar([1, 2], 1.0)


def test_tvar_uniform_tail():
    u = np.random.default_rng(2024).uniform(size=10_000)
    assert tvar(u, 0.99) == pytest.approx(0.995, abs=0.005)


def test_decimal_probabilities_are_exact():
    # 100 * (1 - 0.99) is 1.0000000000000009 in binary
    assert tvar(TENS, 0.99) == 990
    assert loss_quantile(TENS, 0.99) == 990


def test_ylt_sums_programs_and_layers():
    ylt = YearLossTable([0, 0, 0, 1, 1, 1], [0] * 6, [0, 1, 2, 0, 1, 2], [1, 2, 3, 10, 20, 30])
    np.testing.assert_array_equal(trial_losses(ylt), [11, 22, 33])
    assert pml(ylt, 3) == 33


def test_curve_examples():
    c = exceedance_curve([7.0])
    assert c.points == [(7.0, 1.0)]
    c = exceedance_curve([3.0, 5.0, 5.0, 1.0])
    assert c.losses.tolist() == [5.0, 5.0, 3.0, 1.0]
    assert c.probabilities.tolist() == [0.25, 0.5, 0.75, 1.0]


def test_curve_pml_matches_pml_on_random_ylts():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(10, 300))
        losses = np.round(rng.exponential(100.0, n), int(rng.integers(0, 3)))
        c = exceedance_curve(losses)
        for rp in (2, 3.5, 10, n, float(rng.uniform(1.01, n))):
            assert c.pml(rp) == pml(losses, rp)


finite = st.floats(0, 1e9)


@given(st.lists(finite, min_size=1, max_size=200), st.floats(1.001, 1e4), st.floats(1.001, 1e4))
def test_pml_monotone_in_return_period(losses, r1, r2):
    lo, hi = sorted((r1, r2))
    n = len(losses)
    if hi <= n:
        assert pml(losses, lo) <= pml(losses, hi)


@given(st.lists(finite, min_size=1, max_size=200), st.floats(0.001, 0.999), st.floats(0.001, 0.999))
def test_tvar_monotone_and_above_quantile(losses, p1, p2):
    lo, hi = sorted((p1, p2))
    assert tvar(losses, lo) <= tvar(losses, hi) * (1 + 1e-12)
    assert tvar(losses, lo) >= loss_quantile(losses, lo) * (1 - 1e-12)
    if 1 / (1 - lo) <= len(losses):
        assert tvar(losses, lo) >= pml(losses, 1 / (1 - lo)) * (1 - 1e-12)


@given(st.lists(finite, min_size=1, max_size=200))
def test_tvar_near_one_is_max(losses):
    assert tvar(losses, 1 - 1e-9) == max(losses)


@given(st.lists(finite, min_size=2, max_size=100), st.integers(2, 100))
def test_pml_matches_brute_force(losses, rp):
    if rp <= len(losses):
        assert pml(losses, rp) == brute_pml(losses, rp)
