"""JSON experiment configuration.

Example (the bundled ``privacy_sweep.json``)::

    {
      "experiment": "privacy",
      "game": {"a": 100, "c": [0.015, ...], "d": [15, ...]},
      "graph": {"type": "fully_connected", "omega": 0.1},
      "seek": {"alpha": 0.4, "tau": 1e-5, "max_iter": 200000},
      "noise": {"sigma": [1, 2, 10, 20, 100]},
      "attack": {"victim": 0, "budgets": [4], "start": 100},
      "runs": 1000,
      "seed": 20240917,
      "output": "out/privacy"
    }

``noise`` may instead give ``epsilon`` (number or list) and ``mu_adj``; the
scale is then calibrated from the game's sensitivity. If both ``sigma``
and ``epsilon`` are present, ``sigma`` is used and a warning is recorded.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import ConfigError, DpNashError
from .game import Game
from .network import CommGraph, graph_from_dict
from .privacy import PrivacyBudget, calibrate, sensitivity
from .seeking import SeekConfig

EXPERIMENTS = ("privacy", "convergence", "fidelity", "moments")
BUNDLED = ("table1", "privacy_sweep", "budget_sweep", "convergence", "fidelity", "moments")


@dataclass(frozen=True)
class AttackSpec:
    victim: int = 0
    budgets: tuple = (4,)
    start: int = 100
    method: str = "trajectory"


@dataclass
class ExperimentConfig:
    game: Game
    graph: CommGraph
    seek: SeekConfig
    experiment: Optional[str] = None
    sigmas: tuple = ()
    attack: Optional[AttackSpec] = None
    runs: int = 1
    seed: int = 0
    output: str = "out"
    paired: bool = True
    a_values: tuple = ()
    gap_resolution: float = 1e-3
    residual_every: int = 10
    warnings: list = field(default_factory=list)
    raw: dict = field(default_factory=dict, repr=False)

    def echo(self) -> dict:
        """Resolved configuration as plain JSON data."""
        return {
            "experiment": self.experiment,
            "game": {"a": self.game.a, "c": self.game.c.tolist(), "d": self.game.d.tolist()},
            "graph": self.graph.to_dict(),
            "seek": {
                "alpha": self.seek.alpha,
                "tau": self.seek.tau,
                "max_iter": self.seek.max_iter,
            },
            "sigmas": list(self.sigmas),
            "attack": None if self.attack is None else {
                "victim": self.attack.victim,
                "budgets": list(self.attack.budgets),
                "start": self.attack.start,
                "method": self.attack.method,
            },
            "runs": self.runs,
            "seed": self.seed,
            "paired": self.paired,
            "a_values": list(self.a_values),
            "gap_resolution": self.gap_resolution,
            "residual_every": self.residual_every,
        }


def _as_list(value):
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def _parse_game(data) -> Game:
    if "game" not in data:
        raise ConfigError("missing 'game' section")
    g = data["game"]
    if "prosumers" in g:
        c = [p["c"] for p in g["prosumers"]]
        d = [p["d"] for p in g["prosumers"]]
    else:
        try:
            c, d = g["c"], g["d"]
        except KeyError as exc:
            raise ConfigError(f"game section lacks {exc}") from None
    if "a" not in g:
        raise ConfigError("game section lacks market sensitivity 'a'")
    return Game.from_arrays(c, d, g["a"])


def _parse_sigmas(data, game: Game, warnings: list) -> list:
    noise = data.get("noise") or {}
    sigmas = [float(s) for s in _as_list(noise.get("sigma"))]
    eps = _as_list(noise.get("epsilon"))
    if sigmas and eps:
        warnings.append("both sigma and epsilon given; using sigma")
        return sigmas
    if eps:
        if "mu_adj" not in noise:
            raise ConfigError("noise.epsilon requires noise.mu_adj")
        sens = sensitivity(game.prosumers, game.market)
        return [calibrate(PrivacyBudget(float(e), float(noise["mu_adj"])), sens).sigma for e in eps]
    return sigmas


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a decoded JSON config and resolve derived values."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    try:
        warnings: list = []
        game = _parse_game(data)
        seek_data = dict(data.get("seek") or {})
        graph_data = data.get("graph", "fully_connected")
        omega = seek_data.pop("omega", None)
        if isinstance(graph_data, dict) and "omega" in graph_data:
            omega = graph_data["omega"]
        graph = graph_from_dict(graph_data, game.count, omega)
        if "alpha" not in seek_data:
            raise ConfigError("seek.alpha is required")
        seek = SeekConfig(
            alpha=float(seek_data["alpha"]),
            tau=float(seek_data.get("tau", 1e-5)),
            max_iter=int(seek_data.get("max_iter", 200_000)),
            record_every=int(seek_data.get("record_every", 1)),
        )
        sigmas = _parse_sigmas(data, game, warnings)
        if any(s < 0 for s in sigmas):
            raise ConfigError("noise scales must be nonnegative")
        attack = None
        if data.get("attack") is not None:
            a = data["attack"]
            attack = AttackSpec(
                victim=int(a.get("victim", 0)),
                budgets=tuple(int(b) for b in _as_list(a.get("budgets", a.get("budget", 4)))),
                start=int(a.get("start", 100)),
                method=str(a.get("method", "trajectory")),
            )
            if not 0 <= attack.victim < game.count:
                raise ConfigError(f"attack.victim {attack.victim} out of range")
            if any(b < 2 for b in attack.budgets) or attack.start < 0:
                raise ConfigError("attack budgets must be >= 2 and start >= 0")
        experiment = data.get("experiment")
        if experiment is not None and experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
        runs = int(data.get("runs", 1))
        if runs < 1:
            raise ConfigError("runs must be >= 1")
        fidelity = data.get("fidelity") or {}
        convergence = data.get("convergence") or {}
        a_values = tuple(float(a) for a in _as_list(fidelity.get("a_values", [game.a])))
        if any(not a > 0 for a in a_values):
            raise ConfigError("fidelity.a_values must be positive")
        return ExperimentConfig(
            game=game,
            graph=graph,
            seek=seek,
            experiment=experiment,
            sigmas=tuple(sigmas),
            attack=attack,
            runs=runs,
            seed=int(data.get("seed", 0)),
            output=str(data.get("output", "out")),
            paired=bool(data.get("paired", True)),
            a_values=a_values,
            gap_resolution=float(fidelity.get("gap_resolution", 1e-3)),
            residual_every=int(convergence.get("residual_every", 10)),
            warnings=warnings,
            raw=copy.deepcopy(data),
        )
    except ConfigError:
        raise
    except (DpNashError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    """Load a config file, or a bundled one by name (``"table1"``, ...)."""
    text = None
    p = Path(path)
    if p.exists():
        text = p.read_text(encoding="utf-8")
    elif str(path) in BUNDLED:
        text = resources.files("dpnash.configs").joinpath(f"{path}.json").read_text(encoding="utf-8")
    else:
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return parse_config(data)


def bundled_config(name: str) -> dict:
    text = resources.files("dpnash.configs").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)
