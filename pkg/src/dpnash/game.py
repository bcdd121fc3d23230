"""P2P energy trading game: reduced Nash game, equilibrium and dispatch oracles.

Prosumer ``i`` covers demand ``d_i`` by self-producing ``p_i`` at cost
``c_i * p_i**2`` and trading ``q_i = -a*lambda + b_i`` on a market that clears
at ``sum(q) = 0``. Eliminating ``p``, ``q`` and ``lambda`` leaves a
linear-quadratic game in the intercept bids ``b``::

    Gamma_i(b) = -b_i**2 / 2 + beta_i * b_i + sum_{j != i} mu_ij * b_i * b_j

All quantities are in kWh, $ and $/kWh^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ParameterError, SingularGameError


@dataclass(frozen=True)
class ProsumerParams:
    """Cost coefficient ``c`` ($/kWh^2) and private demand ``d`` (kWh)."""

    c: float
    d: float

    def __post_init__(self):
        if not self.c > 0:
            raise ParameterError(f"cost coefficient must be positive, got c={self.c}")
        if not self.d >= 0:
            raise ParameterError(f"demand must be nonnegative, got d={self.d}")


@dataclass(frozen=True)
class MarketParams:
    """Market sensitivity ``a`` (kWh/$) and number of prosumers."""

    a: float
    count: int

    def __post_init__(self):
        if not self.a > 0:
            raise ParameterError(f"market sensitivity must be positive, got a={self.a}")
        if self.count < 2:
            raise ParameterError(f"need at least 2 prosumers, got {self.count}")


@dataclass(frozen=True)
class GameCoefficients:
    """Coefficients of the reduced game.

    ``mu`` has a zero diagonal and constant off-diagonal rows; row ``i`` of
    ``f`` is ``e_i - mu[i]``, so ``f @ b - beta`` is the negated payoff
    gradient.
    """

    beta: np.ndarray
    mu: np.ndarray

    @property
    def count(self) -> int:
        return self.beta.shape[0]

    @cached_property
    def f(self) -> np.ndarray:
        return np.eye(self.count) - self.mu

    @cached_property
    def f_norms(self) -> np.ndarray:
        return np.linalg.norm(self.f, axis=1)

    def with_beta(self, beta) -> "GameCoefficients":
        return GameCoefficients(beta=np.asarray(beta, dtype=float), mu=self.mu)


@dataclass(frozen=True)
class Dispatch:
    price: float
    q: np.ndarray
    p: np.ndarray


@dataclass(frozen=True)
class Game:
    """A prosumer population together with its market.

    Convenience bundle used by the seeking, attack and experiment layers.
    """

    prosumers: tuple
    market: MarketParams
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.prosumers) != self.market.count:
            raise ParameterError(
                f"{len(self.prosumers)} prosumers given for a market of {self.market.count}"
            )

    @classmethod
    def from_arrays(cls, c, d, a) -> "Game":
        c = np.atleast_1d(np.asarray(c, dtype=float))
        d = np.atleast_1d(np.asarray(d, dtype=float))
        if c.shape != d.shape:
            raise ParameterError("c and d must have the same length")
        prosumers = tuple(ProsumerParams(float(ci), float(di)) for ci, di in zip(c, d))
        return cls(prosumers, MarketParams(float(a), len(prosumers)))

    @property
    def count(self) -> int:
        return self.market.count

    @property
    def a(self) -> float:
        return self.market.a

    @property
    def c(self) -> np.ndarray:
        return np.array([p.c for p in self.prosumers])

    @property
    def d(self) -> np.ndarray:
        return np.array([p.d for p in self.prosumers])

    def coefficients(self) -> GameCoefficients:
        if "coeffs" not in self._cache:
            self._cache["coeffs"] = derive_coefficients(self.prosumers, self.market)
        return self._cache["coeffs"]

    def with_demand(self, d) -> "Game":
        return Game.from_arrays(self.c, d, self.a)

    def with_sensitivity(self, a) -> "Game":
        return Game.from_arrays(self.c, self.d, a)


def _check_population(prosumers: Sequence[ProsumerParams], market: MarketParams):
    if len(prosumers) != market.count:
        raise ParameterError(
            f"{len(prosumers)} prosumers given for a market of {market.count}"
        )
    c = np.array([p.c for p in prosumers], dtype=float)
    d = np.array([p.d for p in prosumers], dtype=float)
    return c, d


def beta_gain(c, market: MarketParams):
    """Per-prosumer slope of the demand-to-beta map, ``a*c*I / (a*c*(I-1) + 1)``."""
    a, n = market.a, market.count
    c = np.asarray(c, dtype=float)
    return a * c * n / (a * c * (n - 1) + 1)


def mu_rows(c, market: MarketParams) -> np.ndarray:
    """Off-diagonal interaction weight of each prosumer (constant along its row)."""
    a, n = market.a, market.count
    c = np.asarray(c, dtype=float)
    return (2 * a * c * (n - 1) - (n - 2)) / (2 * (n - 1) * (a * c * (n - 1) + 1))


def derive_coefficients(
    prosumers: Sequence[ProsumerParams], market: MarketParams
) -> GameCoefficients:
    """Reduce the trading game to its quadratic form.

    Parameters
    ----------
    prosumers : sequence of ProsumerParams
        One entry per prosumer, length ``market.count``.
    market : MarketParams

    Returns
    -------
    GameCoefficients
        ``beta[i] = a c_i d_i I / (a c_i (I-1) + 1)`` and ``mu[i, j]`` for
        ``j != i`` from the closed form; ``mu[i, i] = 0``.
    """
    c, d = _check_population(prosumers, market)
    beta = beta_gain(c, market) * d
    n = market.count
    mu = np.repeat(mu_rows(c, market)[:, None], n, axis=1)
    np.fill_diagonal(mu, 0.0)
    return GameCoefficients(beta=beta, mu=mu)


def beta_to_demand(beta_i: float, c_i: float, market: MarketParams) -> float:
    """Invert the demand-to-beta map for a single prosumer."""
    a, n = market.a, market.count
    return beta_i * (a * c_i * (n - 1) + 1) / (a * c_i * n)


def nash_equilibrium(coeffs: GameCoefficients) -> np.ndarray:
    """Unique Nash equilibrium bid profile.

    Each payoff is strictly concave in the player's own bid, so the
    equilibrium is the solution of the stacked first-order conditions
    ``(Id - mu) b = beta``.
    """
    system = coeffs.f
    if np.linalg.matrix_rank(system) < coeffs.count:
        raise SingularGameError("Id - mu is singular; the game has no unique equilibrium")
    return np.linalg.solve(system, coeffs.beta)


def payoff(i: int, bids, coeffs: GameCoefficients) -> float:
    b = np.asarray(bids, dtype=float)
    cross = coeffs.mu[i] @ b - coeffs.mu[i, i] * b[i]
    return float(-0.5 * b[i] ** 2 + coeffs.beta[i] * b[i] + b[i] * cross)


def payoff_gradient(bids, coeffs: GameCoefficients) -> np.ndarray:
    """Vector of own-bid derivatives ``dGamma_i / db_i``."""
    b = np.asarray(bids, dtype=float)
    return coeffs.beta - coeffs.f @ b


def recover_dispatch(bids, prosumers: Sequence[ProsumerParams], market: MarketParams) -> Dispatch:
    """Clearing price, trades and self-production implied by a bid profile."""
    _, d = _check_population(prosumers, market)
    b = np.asarray(bids, dtype=float)
    price = b.sum() / (market.count * market.a)
    q = b - market.a * price
    return Dispatch(price=float(price), q=q, p=d - q)


def total_cost(dispatch: Dispatch, prosumers: Sequence[ProsumerParams]) -> float:
    c = np.array([p.c for p in prosumers], dtype=float)
    return float(np.sum(c * np.asarray(dispatch.p) ** 2))


def social_optimum(prosumers: Sequence[ProsumerParams], market: MarketParams) -> Dispatch:
    """Cost-minimising dispatch under aggregate balance.

    Minimises ``sum c_i p_i^2`` subject to ``sum p = sum d``; the optimum
    equalises marginal costs ``2 c_i p_i``, which is reported as the price.
    """
    c, d = _check_population(prosumers, market)
    inv = 1.0 / c
    p = d.sum() * inv / inv.sum()
    price = 2 * c[0] * p[0]
    return Dispatch(price=float(price), q=d - p, p=p)
