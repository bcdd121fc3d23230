"""Distributed Nash equilibrium seeking with Laplace-perturbed private data.

The package models a peer-to-peer energy market as a linear-quadratic
game, runs the consensus plus gradient seeking iteration in exact or
differentially private mode, mounts a least-squares inference attack on an
observed estimate window, and runs seeded Monte Carlo campaigns.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AttackWindowError,
    ConfigError,
    DivergenceError,
    DpNashError,
    GraphError,
    ParameterError,
    SingularGameError,
    StepSizeError,
)
from .game import (  # noqa: E402
    Dispatch,
    Game,
    GameCoefficients,
    MarketParams,
    ProsumerParams,
    beta_to_demand,
    derive_coefficients,
    nash_equilibrium,
    payoff,
    recover_dispatch,
    social_optimum,
    total_cost,
)
from .network import CommGraph, from_edges, fully_connected, spectrum  # noqa: E402
from .privacy import (  # noqa: E402
    LaplaceSpec,
    PrivacyBudget,
    adjacent,
    calibrate,
    dp_ratio_check,
    sample_laplace,
    sensitivity,
)
from .seeking import (  # noqa: E402
    NoiseRealization,
    SeekConfig,
    Trajectory,
    build_iteration_matrix,
    residual_log,
    seek,
    step_size_bound,
    variance_bound,
)
from .attack import AttackObservation, attack_statistics, infer, observe  # noqa: E402
from .config import ExperimentConfig, load_config, parse_config  # noqa: E402
from .experiments import audit, run_experiment  # noqa: E402

__all__ = [name for name in dir() if not name.startswith("_")]
