import numpy as np
import pytest

from dpnash.attack import AttackObservation, attack_statistics, hits, infer, observe
from dpnash.errors import AttackWindowError, ParameterError
from dpnash.network import from_edges, fully_connected
from dpnash.seeking import NoiseRealization, SeekConfig, seek

from conftest import random_game

SHORT_WINDOWS = [(1, 5), (12, 16), (23, 26), (27, 30), (100, 102)]


@pytest.fixture(scope="module")
def exact_traj():
    from dpnash.game import Game

    game = Game.from_arrays([0.015, 0.03, 0.02, 0.015, 0.025, 0.03], [15, 18, 25, 20, 18, 20], 100)
    graph = fully_connected(6, 0.1)
    traj = seek(game.coefficients(), graph, SeekConfig(alpha=0.4, max_iter=200))
    return game, graph, traj


@pytest.mark.parametrize("window", SHORT_WINDOWS)
@pytest.mark.parametrize("method", ["trajectory", "stacked"])
def test_short_windows_recover_demand(exact_traj, window, method):
    game, graph, traj = exact_traj
    res = infer(observe(traj, game, graph, 0.4, 0, *window), method=method)
    assert res.d_hat == pytest.approx(15.0, abs=1e-3)
    assert res.beta_hat == pytest.approx(15.88, abs=0.005)
    assert res.residual >= 0


def test_long_window_exact(exact_traj):
    game, graph, traj = exact_traj
    res = infer(observe(traj, game, graph, 0.4, 0, 100, 107))
    assert res.determined
    assert res.d_hat == pytest.approx(15.0, abs=1e-6)
    assert not res.warnings


def test_long_windows_exact_on_random_games():
    rng = np.random.default_rng(99)
    for _ in range(20):
        game = random_game(rng)
        n = game.count
        graph = fully_connected(n, rng.uniform(0.02, 1 / n))
        traj = seek(game.coefficients(), graph, SeekConfig(alpha=0.05, max_iter=60))
        victim = int(rng.integers(n))
        k1 = int(rng.integers(0, 40))
        res = infer(observe(traj, game, graph, 0.05, victim, k1, k1 + n))
        beta = game.coefficients().beta[victim]
        assert abs(res.beta_hat - beta) <= 1e-6 * max(1, abs(beta))
        assert res.determined


def test_sparse_graph_attack():
    rng = np.random.default_rng(5)
    game = random_game(rng, count=5)
    graph = from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)], 0.3)
    traj = seek(game.coefficients(), graph, SeekConfig(alpha=0.05, max_iter=40))
    for method in ("trajectory", "stacked"):
        res = infer(observe(traj, game, graph, 0.05, 2, 10, 25), method=method)
        assert res.d_hat == pytest.approx(game.d[2], rel=1e-6)


def test_zero_noise_attack_matches_exact(exact_traj):
    game, graph, traj = exact_traj
    priv = seek(game.coefficients(), graph, SeekConfig(alpha=0.4, max_iter=200),
                noise=NoiseRealization(np.zeros(6), 0.0))
    a = infer(observe(traj, game, graph, 0.4, 0, 100, 103))
    b = infer(observe(priv, game, graph, 0.4, 0, 100, 103))
    assert a.d_hat == b.d_hat


def test_noisy_attack_sees_perturbed_beta(exact_traj):
    game, graph, _ = exact_traj
    gamma = np.array([1.5, 0, 0, 0, 0, 0.0])
    priv = seek(game.coefficients(), graph, SeekConfig(alpha=0.4, max_iter=200),
                noise=NoiseRealization(gamma, 1.0))
    res = infer(observe(priv, game, graph, 0.4, 0, 100, 103))
    assert res.beta_hat == pytest.approx(game.coefficients().beta[0] + 1.5, abs=1e-6)


def test_window_errors(exact_traj):
    game, graph, traj = exact_traj
    with pytest.raises(AttackWindowError):
        infer(observe(traj, game, graph, 0.4, 0, 5, 5))
    with pytest.raises(AttackWindowError):
        observe(traj, game, graph, 0.4, 0, 5, 4)
    with pytest.raises(ParameterError):
        infer(observe(traj, game, graph, 0.4, 0, 5, 8), method="magic")


def test_two_step_window_flags_undetermined(exact_traj):
    game, graph, traj = exact_traj
    res = infer(observe(traj, game, graph, 0.4, 0, 100, 101))
    assert not res.determined
    assert any("identify" in w for w in res.warnings)


def test_observation_json_roundtrip(exact_traj):
    game, graph, traj = exact_traj
    obs = observe(traj, game, graph, 0.4, 0, 100, 103)
    text = obs.dumps()
    assert '"known_beta": [\n  null' in text
    back = AttackObservation.loads(text)
    np.testing.assert_array_equal(back.observed, obs.observed)
    assert infer(back).d_hat == pytest.approx(15.0, abs=1e-6)


def test_attack_statistics():
    st = attack_statistics([15.0] * 4, 15.0)
    assert st.mse == 0 and st.hit_rate == 1.0
    st = attack_statistics([18.0], 15.0)
    assert st.mse == pytest.approx(9.0) and st.hit_rate == 0.0
    st = attack_statistics([13.5, 16.5, 12.0, 15.0], 15.0)
    assert st.hit_rate == 0.75
    assert st.median == pytest.approx(14.25)
    assert hits([16.5], 15.0)[0]
    with pytest.raises(ParameterError):
        attack_statistics([], 15.0)
