"""Laplace mechanism for the game coefficients.

Noise convention: ``Lap(sigma)`` has density ``exp(-|x|/sigma) / (2 sigma)``
(variance ``2 sigma**2``); ``sigma`` is always the scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import MarketParams, beta_gain
from .errors import ParameterError

# relative slack when comparing the log density ratio with epsilon, so the
# calibrated scale sits exactly on the boundary despite roundoff
RATIO_RTOL = 1e-12


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    mu_adj: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if not self.mu_adj > 0:
            raise ParameterError(f"adjacency radius must be positive, got {self.mu_adj}")


@dataclass(frozen=True)
class LaplaceSpec:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ParameterError(f"noise scale must be nonnegative, got {self.sigma}")


def mix_seed(root: int, *keys: int) -> int:
    """Derive an independent 64-bit seed from a root seed and integer keys.

    Uses numpy's ``SeedSequence`` hashing with ``keys`` as the spawn key, so
    ``mix_seed(r, cell, run)`` streams are reproducible and statistically
    independent across cells and runs.
    """
    ss = np.random.SeedSequence(entropy=int(root), spawn_key=tuple(int(k) for k in keys))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def sensitivity(prosumers, market: MarketParams) -> float:
    """Largest per-prosumer amplification from demand to ``beta``."""
    c = np.array([p.c for p in prosumers], dtype=float)
    return float(np.max(beta_gain(c, market)))


def calibrate(budget: PrivacyBudget, sens: float, seed: int = 0) -> LaplaceSpec:
    """Smallest scale giving epsilon-DP for ``mu_adj``-adjacent demands."""
    return LaplaceSpec(sigma=sens * budget.mu_adj / budget.epsilon, seed=seed)


def laplace_from_uniform(u, sigma: float) -> np.ndarray:
    """Inverse-CDF transform of ``u`` uniform on (-1/2, 1/2)."""
    u = np.asarray(u, dtype=float)
    return -sigma * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def draw_laplace(rng: np.random.Generator, sigma: float, n: int) -> np.ndarray:
    """``n`` i.i.d. Laplace draws from an existing generator.

    Always consumes ``n`` uniforms (more only if an endpoint is hit) so that
    streams stay aligned across different ``sigma``.
    """
    if n < 1:
        raise ParameterError("need at least one draw")
    u = rng.random(n) - 0.5
    # u = -1/2 maps to an infinite draw; redraw (probability 2**-53 each)
    while np.any(u == -0.5):
        hit = u == -0.5
        u[hit] = rng.random(int(hit.sum())) - 0.5
    if sigma == 0:
        return np.zeros(n)
    return laplace_from_uniform(u, sigma)


def sample_laplace(spec: LaplaceSpec, n: int) -> np.ndarray:
    return draw_laplace(make_rng(spec.seed), spec.sigma, n)


def laplace_cdf(x, sigma: float):
    x = np.asarray(x, dtype=float)
    return np.where(x < 0, 0.5 * np.exp(x / sigma), 1.0 - 0.5 * np.exp(-x / sigma))


def adjacent(d, d_prime, mu_adj: float) -> bool:
    """Whether two demand vectors differ in at most one entry by at most ``mu_adj``."""
    d = np.asarray(d, dtype=float)
    d_prime = np.asarray(d_prime, dtype=float)
    if d.shape != d_prime.shape:
        raise ParameterError(f"length mismatch: {d.shape} vs {d_prime.shape}")
    diff = np.abs(d - d_prime)
    changed = np.flatnonzero(diff != 0)
    return len(changed) <= 1 and bool(np.all(diff <= mu_adj))


def log_density_ratio(z, beta, beta_prime, sigma: float) -> float:
    """``log p_beta(z) - log p_beta'(z)`` for the mechanism ``beta + Lap(sigma)``."""
    z, beta, beta_prime = (np.asarray(v, dtype=float) for v in (z, beta, beta_prime))
    return float(np.sum(np.abs(z - beta_prime) - np.abs(z - beta)) / sigma)


def dp_ratio_check(beta, beta_prime, sigma: float, epsilon: float):
    """Check the worst-case density ratio of ``beta + Lap(sigma)`` against ``exp(epsilon)``.

    The supremum over outputs of the ratio is ``exp(||beta - beta'||_1 / sigma)``.
    Returns ``(passes, ratio)``; ``ratio`` is ``inf`` when it overflows or
    when ``sigma == 0`` and the inputs differ.
    """
    beta = np.asarray(beta, dtype=float)
    beta_prime = np.asarray(beta_prime, dtype=float)
    if beta.shape != beta_prime.shape:
        raise ParameterError("beta vectors must have the same length")
    gap = float(np.sum(np.abs(beta - beta_prime)))
    if gap == 0:
        return True, 1.0
    if sigma == 0:
        return False, float("inf")
    log_ratio = gap / sigma
    ratio = float(np.exp(log_ratio)) if log_ratio < 709 else float("inf")
    return log_ratio <= epsilon * (1 + RATIO_RTOL), ratio
