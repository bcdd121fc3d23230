import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpnash.errors import ParameterError, SingularGameError
from dpnash.game import (
    Game,
    GameCoefficients,
    MarketParams,
    ProsumerParams,
    beta_to_demand,
    derive_coefficients,
    nash_equilibrium,
    payoff,
    payoff_gradient,
    recover_dispatch,
    social_optimum,
    total_cost,
)

# regression constant: total cost at the reference-game equilibrium
TABLE1_NE_COST = 46.413257936898205


def test_table1_beta(table1):
    beta = table1.coefficients().beta
    np.testing.assert_allclose(beta, [15.88, 20.25, 27.27, 21.18, 20.00, 22.50], atol=0.005)


def test_mu_structure(table1):
    co = table1.coefficients()
    assert np.all(np.diag(co.mu) == 0)
    for i in range(co.count):
        off = np.delete(co.mu[i], i)
        assert np.ptp(off) == 0
    f = co.f
    np.testing.assert_array_equal(np.diag(f), np.ones(co.count))
    np.testing.assert_array_equal(f - np.eye(co.count), -co.mu)


def test_mu_formula_single_entry():
    market = MarketParams(a=100.0, count=6)
    co = derive_coefficients([ProsumerParams(0.015, 15)] + [ProsumerParams(0.03, 18)] * 5, market)
    x = 100 * 0.015 * 5
    assert co.mu[0, 1] == pytest.approx((2 * x - 4) / (2 * 5 * (x + 1)))
    assert co.beta[0] == pytest.approx(100 * 0.015 * 15 * 6 / (x + 1))


@pytest.mark.parametrize(
    "c, a, count",
    [(0.0, 10.0, 3), (-1.0, 10.0, 3), (0.1, 0.0, 3), (0.1, 10.0, 1)],
)
def test_invalid_parameters(c, a, count):
    with pytest.raises(ParameterError):
        derive_coefficients([ProsumerParams(c, 1.0)] * max(count, 1), MarketParams(a, count))


def test_negative_demand_rejected():
    with pytest.raises(ParameterError):
        ProsumerParams(0.1, -1.0)


def test_population_mismatch():
    with pytest.raises(ParameterError):
        derive_coefficients([ProsumerParams(0.1, 1.0)] * 3, MarketParams(10.0, 4))


@settings(max_examples=200, deadline=None)
@given(
    n=st.integers(2, 10),
    a=st.floats(0.5, 500),
    seed=st.integers(0, 2**31),
)
def test_demand_roundtrip(n, a, seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(1e-3, 0.2, n)
    d = rng.uniform(0, 50, n)
    g = Game.from_arrays(c, d, a)
    beta = g.coefficients().beta
    back = np.array([beta_to_demand(beta[i], c[i], g.market) for i in range(n)])
    np.testing.assert_allclose(back, d, rtol=1e-12, atol=1e-12)


def test_equilibrium_satisfies_first_order_conditions(table1):
    co = table1.coefficients()
    b = nash_equilibrium(co)
    np.testing.assert_allclose(payoff_gradient(b, co), 0, atol=1e-10)


def test_equilibrium_is_best_response(table1):
    co = table1.coefficients()
    b = nash_equilibrium(co)
    for i in range(co.count):
        base = payoff(i, b, co)
        for step in (-1.0, -1e-3, 1e-3, 1.0):
            dev = b.copy()
            dev[i] += step
            assert payoff(i, dev, co) < base


def test_singular_game():
    mu = np.array([[0.0, 1.0], [1.0, 0.0]])
    co = GameCoefficients(beta=np.array([1.0, 2.0]), mu=mu)
    with pytest.raises(SingularGameError):
        nash_equilibrium(co)


def test_dispatch_balance(table1):
    b = nash_equilibrium(table1.coefficients())
    disp = recover_dispatch(b, table1.prosumers, table1.market)
    assert abs(disp.q.sum()) < 1e-9
    np.testing.assert_allclose(disp.p + disp.q, table1.d, atol=1e-9)
    assert disp.price == pytest.approx(b.sum() / (6 * 100))


def test_table1_cost_regression(table1):
    b = nash_equilibrium(table1.coefficients())
    cost = total_cost(recover_dispatch(b, table1.prosumers, table1.market), table1.prosumers)
    assert cost == pytest.approx(TABLE1_NE_COST, rel=1e-12)


def test_social_optimum(table1):
    opt = social_optimum(table1.prosumers, table1.market)
    c = table1.c
    assert opt.p.sum() == pytest.approx(table1.d.sum())
    np.testing.assert_allclose(2 * c * opt.p, opt.price)
    assert abs(opt.q.sum()) < 1e-9
    b = nash_equilibrium(table1.coefficients())
    ne_cost = total_cost(recover_dispatch(b, table1.prosumers, table1.market), table1.prosumers)
    assert total_cost(opt, table1.prosumers) <= ne_cost


def test_with_helpers(table1):
    g2 = table1.with_sensitivity(10.0)
    assert g2.a == 10.0 and np.array_equal(g2.d, table1.d)
    g3 = table1.with_demand([1, 2, 3, 4, 5, 6])
    assert g3.d[5] == 6.0
