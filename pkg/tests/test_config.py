import json

import pytest

from dpnash.config import BUNDLED, bundled_config, load_config, parse_config
from dpnash.errors import ConfigError


def base():
    return bundled_config("table1")


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_configs_load(name):
    cfg = load_config(name)
    assert cfg.game.count == 6
    assert cfg.graph.omega == 0.1


def test_file_and_echo(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(bundled_config("privacy_sweep")))
    cfg = load_config(p)
    assert cfg.experiment == "privacy"
    assert cfg.sigmas == (1.0, 2.0, 10.0, 20.0, 100.0)
    assert cfg.attack.budgets == (4,)
    echo = cfg.echo()
    assert parse_config(echo | {"noise": {"sigma": echo["sigmas"]}}).echo() == echo


def test_epsilon_calibration():
    data = base() | {"noise": {"epsilon": [1.0, 0.5], "mu_adj": 1.0}}
    assert parse_config(data).sigmas == pytest.approx((1.125, 2.25))


def test_sigma_wins_over_epsilon():
    cfg = parse_config(base() | {"noise": {"sigma": 3, "epsilon": 1, "mu_adj": 1}})
    assert cfg.sigmas == (3.0,)
    assert cfg.warnings


@pytest.mark.parametrize(
    "patch",
    [
        {"runs": 0},
        {"noise": {"sigma": [-1]}},
        {"noise": {"epsilon": 1}},
        {"attack": {"victim": 6}},
        {"attack": {"budgets": [1]}},
        {"experiment": "nope"},
        {"seek": {}},
        {"graph": {"type": "fully_connected", "omega": 0.5}},
        {"game": {"a": 100, "c": [0.1, 0.1], "d": [1, -1]}},
        {"game": {"c": [0.1, 0.1], "d": [1, 1]}},
        {"fidelity": {"a_values": [0]}},
    ],
)
def test_invalid_configs(patch):
    with pytest.raises(ConfigError):
        parse_config(base() | patch)


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.json")


def test_bad_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)


def test_prosumer_list_form():
    data = base()
    data["game"] = {"a": 100, "prosumers": [{"c": 0.01, "d": 5}, {"c": 0.02, "d": 6}, {"c": 0.03, "d": 7}]}
    data["graph"] = {"type": "edges", "edges": [[0, 1], [1, 2]], "omega": 0.2}
    cfg = parse_config(data)
    assert cfg.game.count == 3 and not cfg.graph.is_complete()
