import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from dpnash.errors import ParameterError
from dpnash.game import Game, MarketParams, ProsumerParams, beta_gain
from dpnash.privacy import (
    LaplaceSpec,
    PrivacyBudget,
    adjacent,
    calibrate,
    dp_ratio_check,
    draw_laplace,
    laplace_cdf,
    laplace_from_uniform,
    log_density_ratio,
    make_rng,
    mix_seed,
    sample_laplace,
    sensitivity,
)


def test_table1_sensitivity_and_calibration(table1):
    A = sensitivity(table1.prosumers, table1.market)
    assert A == pytest.approx(1.125)
    assert calibrate(PrivacyBudget(1.0, 1.0), A).sigma == pytest.approx(1.125)
    assert calibrate(PrivacyBudget(0.5, 2.0), A).sigma == pytest.approx(4.5)


def test_budget_validation():
    with pytest.raises(ParameterError):
        PrivacyBudget(0.0, 1.0)
    with pytest.raises(ParameterError):
        PrivacyBudget(1.0, -1.0)
    with pytest.raises(ParameterError):
        LaplaceSpec(-1.0)


def test_inverse_cdf_formula():
    u = np.array([-0.25, 0.0, 0.25])
    np.testing.assert_allclose(laplace_from_uniform(u, 2.0), [-2 * math.log(2), 0.0, 2 * math.log(2)])


def test_laplace_distribution_ks():
    x = sample_laplace(LaplaceSpec(sigma=3.0, seed=7), 20000)
    res = stats.kstest(x, stats.laplace(scale=3.0).cdf)
    assert res.pvalue > 1e-3
    assert np.var(x) == pytest.approx(2 * 9.0, rel=0.05)


def test_laplace_cdf_matches_scipy():
    x = np.linspace(-10, 10, 41)
    np.testing.assert_allclose(laplace_cdf(x, 1.7), stats.laplace(scale=1.7).cdf(x), atol=1e-14)


def test_sampling_is_deterministic():
    a = sample_laplace(LaplaceSpec(1.0, seed=3), 10)
    b = sample_laplace(LaplaceSpec(1.0, seed=3), 10)
    np.testing.assert_array_equal(a, b)


def test_draws_are_paired_across_sigma():
    a = draw_laplace(make_rng(11), 1.0, 6)
    b = draw_laplace(make_rng(11), 5.0, 6)
    np.testing.assert_allclose(b, 5 * a)
    np.testing.assert_array_equal(draw_laplace(make_rng(11), 0.0, 6), np.zeros(6))


def test_mix_seed_independent_keys():
    seeds = {mix_seed(1, cell, run) for cell in range(5) for run in range(100)}
    assert len(seeds) == 500
    assert mix_seed(1, 2, 3) == mix_seed(1, 2, 3)
    assert mix_seed(1, 2, 3) != mix_seed(2, 2, 3)


def test_adjacent():
    assert adjacent([1, 2, 3], [1, 2, 3], 0.5)
    assert adjacent([1, 2, 3], [1, 2.5, 3], 0.5)
    assert not adjacent([1, 2, 3], [1, 2.6, 3], 0.5)
    assert not adjacent([1, 2, 3], [1.1, 2.1, 3], 0.5)
    with pytest.raises(ParameterError):
        adjacent([1, 2], [1, 2, 3], 1.0)


def test_dp_ratio_check_edges():
    assert dp_ratio_check([1, 2], [1, 2], 0.0, 0.1) == (True, 1.0)
    ok, ratio = dp_ratio_check([1, 2], [1, 3], 0.0, 1.0)
    assert not ok and ratio == math.inf
    ok, ratio = dp_ratio_check([1, 2], [1, 3], 1.0, 1.0)
    assert ok and ratio == pytest.approx(math.e)
    ok, _ = dp_ratio_check([1, 2], [1, 3], 0.5, 1.0)
    assert not ok


@settings(max_examples=100, deadline=None)
@given(
    seed=st.integers(0, 2**31),
    eps=st.floats(0.05, 5.0),
    mu=st.floats(0.01, 10.0),
)
def test_calibrated_scale_gives_dp(seed, eps, mu):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    game = Game.from_arrays(rng.uniform(1e-3, 0.1, n), rng.uniform(0, 40, n), rng.uniform(1, 200))
    A = sensitivity(game.prosumers, game.market)
    d2 = game.d.copy()
    j = int(rng.integers(n))
    d2[j] = max(d2[j] + mu * rng.uniform(-1, 1), 0.0)
    assert adjacent(game.d, d2, mu)
    b1 = game.coefficients().beta
    b2 = game.with_demand(d2).coefficients().beta
    assert np.sum(np.abs(b1 - b2)) <= A * mu * (1 + 1e-12)
    sigma = calibrate(PrivacyBudget(eps, mu), A).sigma
    assert dp_ratio_check(b1, b2, sigma, eps)[0]
    # a realized output never exceeds the analytic supremum
    z = b1 + rng.laplace(scale=sigma, size=n)
    assert log_density_ratio(z, b1, b2, sigma) <= eps * (1 + 1e-9)


def test_sensitivity_is_max_gain():
    market = MarketParams(50.0, 4)
    pros = [ProsumerParams(c, 1.0) for c in (0.01, 0.02, 0.05, 0.1)]
    assert sensitivity(pros, market) == pytest.approx(beta_gain(np.array([0.01, 0.02, 0.05, 0.1]), market).max())
