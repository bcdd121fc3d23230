import numpy as np
import pytest

from dpnash.config import bundled_config, parse_config
from dpnash.errors import ConfigError
from dpnash.experiments import audit, resolve_threads, run_experiment, run_seed


def small(name, **over):
    data = bundled_config(name)
    data.update(over)
    return parse_config(data)


def test_privacy_schema_and_audit():
    cfg = small("privacy_sweep", runs=5)
    rep = run_experiment(cfg)
    texts = rep.csv_texts()
    assert texts["runs"].splitlines()[0] == "# dpnash/privacy-runs/1"
    assert texts["runs"].splitlines()[1].startswith("sigma,budget,run,d_hat,abs_error")
    assert texts["aggregate"].splitlines()[1].startswith("sigma,budget,mse,hit_rate")
    assert len(rep.records.rows) == 25
    assert audit(rep, cfg) == []


def test_audit_detects_tampering():
    cfg = small("privacy_sweep", runs=3)
    rep = run_experiment(cfg)
    rep.aggregates.rows[0]["mse"] += 1.0
    assert audit(rep, cfg)


def test_noiseless_attack_is_exact():
    cfg = small("privacy_sweep", runs=3, noise={"sigma": [0]},
                attack={"victim": 0, "budgets": [3, 20], "start": 100})
    rep = run_experiment(cfg)
    for r in rep.records.rows:
        assert r["d_hat"] == pytest.approx(15.0, abs=1e-3)
    assert all(a["mse"] < 1e-6 for a in rep.aggregates.rows)


def test_privacy_needs_attack():
    data = bundled_config("privacy_sweep")
    del data["attack"]
    with pytest.raises(ConfigError):
        run_experiment(parse_config(data))


def test_determinism_and_threads():
    cfg = small("convergence", runs=4, noise={"sigma": [2, 20]})
    a = run_experiment(cfg, threads=1).csv_texts()
    b = run_experiment(cfg, threads=3).csv_texts()
    assert a == b


def test_paired_seeds():
    cfg = small("convergence", runs=2)
    assert run_seed(cfg, 0, 1) == run_seed(cfg, 3, 1)
    cfg.paired = False
    assert run_seed(cfg, 0, 1) != run_seed(cfg, 3, 1)


def test_failure_isolation():
    cfg = small("convergence", runs=2, noise={"sigma": [1]}, seek={"alpha": 5.0, "max_iter": 1000})
    rep = run_experiment(cfg)
    assert rep.failed == 2
    assert all(r["status"] == "diverged" for r in rep.records.rows)
    agg = rep.aggregates.rows[0]
    assert agg["n_failed"] == 2 and agg["n_ok"] == 0
    assert audit(rep, cfg) == []


def test_fidelity_zero_noise_gap():
    cfg = small("fidelity", runs=2, noise={"sigma": [0.0]})
    rep = run_experiment(cfg)
    for r in rep.records.rows:
        assert abs(r["cost_gap"]) < 1e-9
    assert set(rep.extra) == {"bids"}
    assert audit(rep, cfg) == []


def test_convergence_outputs():
    cfg = small("convergence", runs=2, noise={"sigma": [5]})
    rep = run_experiment(cfg)
    res = rep.extra["residuals"].rows
    assert res[0]["iteration"] == 0
    assert {r["run"] for r in res} == {0, 1}
    assert all(r["converged"] for r in rep.records.rows)
    assert audit(rep, cfg) == []


def test_moments_small():
    cfg = small("moments", runs=5)
    rep = run_experiment(cfg)
    agg = rep.aggregates.rows[0]
    assert agg["variance_bound"] == pytest.approx(0.3216562392169468)
    assert np.isfinite(agg["mean_sq_deviation"])
    assert audit(rep, cfg) == []


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv("DPNASH_THREADS", raising=False)
    assert resolve_threads() == 1
    monkeypatch.setenv("DPNASH_THREADS", "3")
    assert resolve_threads() == 3
    assert resolve_threads(2) == 2
