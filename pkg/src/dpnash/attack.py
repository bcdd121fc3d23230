"""Inference attack on a prosumer's private demand.

The adversary sees one prosumer's (the victim's) estimate ``y_v(k)`` over
the window ``k1..k2`` and knows everything else about the iteration except
``beta_v``: ``a``, all ``c_i``, the graph, ``omega``, ``alpha`` and
``beta_l`` for ``l != v``. It fits the dynamics to the observed window by
least squares.

Two formulations are provided:

``"trajectory"``
    The other prosumers' window-start estimates ``z_l(k1)`` and ``beta_v``
    are the unknowns; the dynamics are imposed exactly and the victim's
    simulated estimates are fitted to the observations. Linear in the
    unknowns, so a single least-squares solve gives the optimum.
``"stacked"``
    The victim's estimates are pinned to the observations and every update
    equation of every prosumer in the window is stacked into one system
    over ``beta_v`` and all ``z_l(k)``. Identical to ``"trajectory"`` on
    noiseless data; it only weighs equation residuals instead of
    observation residuals, and grows with the window length.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import AttackWindowError, ParameterError
from .game import GameCoefficients, MarketParams, beta_to_demand, derive_coefficients, ProsumerParams
from .network import CommGraph, graph_from_dict
from .seeking import stacking_matrix

RANK_RTOL = 1e-8
ILL_CONDITIONED = 1e12
# largest stacked system solved densely
STACKED_MAX_UNKNOWNS = 6000


@dataclass
class AttackObservation:
    victim: int
    k1: int
    k2: int
    observed: np.ndarray  # (k2 - k1 + 1, I)
    known_beta: np.ndarray  # victim entry ignored (nan on disk)
    c: np.ndarray
    a: float
    graph: CommGraph
    alpha: float

    def __post_init__(self):
        self.observed = np.asarray(self.observed, dtype=float)
        self.known_beta = np.asarray(self.known_beta, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.shape[0]
        if self.k2 < self.k1:
            raise AttackWindowError(f"empty window {self.k1}..{self.k2}")
        if self.observed.shape != (self.k2 - self.k1 + 1, n):
            raise ParameterError(
                f"observed has shape {self.observed.shape}, expected {(self.k2 - self.k1 + 1, n)}"
            )
        if not 0 <= self.victim < n:
            raise ParameterError(f"victim {self.victim} out of range")
        if self.graph.count != n or self.known_beta.shape != (n,):
            raise ParameterError("graph / known_beta size does not match the population")

    @property
    def count(self) -> int:
        return self.c.shape[0]

    @property
    def budget(self) -> int:
        return self.k2 - self.k1 + 1

    @property
    def market(self) -> MarketParams:
        return MarketParams(self.a, self.count)

    def coefficients(self) -> GameCoefficients:
        # demands are irrelevant for mu; beta is replaced by the known values
        prosumers = [ProsumerParams(float(ci), 0.0) for ci in self.c]
        coeffs = derive_coefficients(prosumers, self.market)
        beta = self.known_beta.copy()
        beta[self.victim] = 0.0
        return coeffs.with_beta(beta)

    def to_dict(self) -> dict:
        known = [None if i == self.victim else float(b) for i, b in enumerate(self.known_beta)]
        return {
            "victim": self.victim,
            "k1": self.k1,
            "k2": self.k2,
            "observed": self.observed.tolist(),
            "known_beta": known,
            "c": self.c.tolist(),
            "a": self.a,
            "graph": self.graph.to_dict(),
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AttackObservation":
        known = np.array([np.nan if b is None else b for b in data["known_beta"]], dtype=float)
        n = len(data["c"])
        return cls(
            victim=int(data["victim"]),
            k1=int(data["k1"]),
            k2=int(data["k2"]),
            observed=np.array(data["observed"], dtype=float),
            known_beta=known,
            c=np.array(data["c"], dtype=float),
            a=float(data["a"]),
            graph=graph_from_dict(data["graph"], n),
            alpha=float(data["alpha"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "AttackObservation":
        return cls.from_dict(json.loads(text))


def observe(traj, game, graph: CommGraph, alpha: float, victim: int, k1: int, k2: int) -> AttackObservation:
    """Cut the victim's window out of an executed trajectory.

    The adversary is handed the true ``beta_l`` of all other prosumers.
    """
    return AttackObservation(
        victim=victim,
        k1=k1,
        k2=k2,
        observed=traj.row_window(victim, k1, k2),
        known_beta=game.coefficients().beta,
        c=game.c,
        a=game.a,
        graph=graph,
        alpha=alpha,
    )


@dataclass
class InferenceResult:
    beta_hat: float
    d_hat: float
    residual: float
    determined: bool
    rank: int
    unknowns: int
    condition: float
    warnings: list = field(default_factory=list)


def _solve(A: np.ndarray, rhs: np.ndarray):
    """Minimum-norm least squares with a relative rank cut.

    Unknown 0 is identified when the unit vector ``e_0`` lies in the row
    space of ``A``, i.e. its projection onto the retained right singular
    vectors has unit norm.
    """
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    tol = RANK_RTOL * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    coef = (u[:, :rank].T @ rhs) / s[:rank]
    x = vt[:rank].T @ coef
    cond = float(s[0] / s[rank - 1]) if rank else float("inf")
    leak = 1.0 - float(np.sum(vt[:rank, 0] ** 2))
    return x, rank, cond, leak < 1e-10


def _trajectory_system(obs: AttackObservation):
    n, v = obs.count, obs.victim
    coeffs = obs.coefficients()
    others = [l for l in range(n) if l != v]
    n_unk = 1 + len(others) * n
    # stacked state y (n*n) as an affine function of the unknowns; last column constant
    S = np.zeros((n * n, n_unk + 1))
    S[v * n:(v + 1) * n, n_unk] = obs.observed[0]
    for pos, l in enumerate(others):
        S[l * n:(l + 1) * n, 1 + pos * n:1 + (pos + 1) * n] = np.eye(n)
    target = np.zeros((n, n_unk + 1))
    for l in others:
        target[l, n_unk] = obs.known_beta[l]
    target[v, 0] = 1.0
    F = stacking_matrix(coeffs)
    Q = np.eye(n * n) - np.kron(obs.graph.laplacian, np.eye(n)) - obs.alpha * F @ F.T
    drive = obs.alpha * F @ target
    rows = np.empty(((obs.budget - 1) * n, n_unk))
    rhs = np.empty((obs.budget - 1) * n)
    for k in range(1, obs.budget):
        S = Q @ S + drive
        blk = S[v * n:(v + 1) * n]
        rows[(k - 1) * n:k * n] = blk[:, :n_unk]
        rhs[(k - 1) * n:k * n] = obs.observed[k] - blk[:, n_unk]
    return rows, rhs, n_unk


def _stacked_system(obs: AttackObservation):
    n, v, K = obs.count, obs.victim, obs.budget
    coeffs = obs.coefficients()
    others = [l for l in range(n) if l != v]
    pos = {l: p for p, l in enumerate(others)}
    per_k = len(others) * n
    n_unk = 1 + K * per_k
    if n_unk > STACKED_MAX_UNKNOWNS:
        raise ParameterError(
            f"stacked system with {n_unk} unknowns is too large; use method='trajectory'"
        )
    A = np.zeros(((K - 1) * n * n, n_unk))
    rhs = np.zeros((K - 1) * n * n)
    eye = np.eye(n)
    adj = obs.graph.adjacency
    deg = obs.graph.degrees
    om, al = obs.graph.omega, obs.alpha
    r = 0
    for k in range(K - 1):
        for l in range(n):
            rows = slice(r, r + n)
            # z_l(k+1) - M_l z_l(k) - omega * sum_j z_j(k) - alpha f_l beta_l = 0
            terms = [(l, k + 1, eye), (l, k, -((1 - om * deg[l]) * eye - al * np.outer(coeffs.f[l], coeffs.f[l])))]
            terms += [(j, k, -om * eye) for j in np.flatnonzero(adj[l])]
            for who, kk, M in terms:
                if who == v:
                    rhs[rows] -= M @ obs.observed[kk]
                else:
                    col = 1 + kk * per_k + pos[who] * n
                    A[rows, col:col + n] += M
            if l == v:
                A[rows, 0] -= al * coeffs.f[l]
            else:
                rhs[rows] += al * coeffs.f[l] * obs.known_beta[l]
            r += n
    return A, rhs, n_unk


def infer(obs: AttackObservation, method: str = "trajectory") -> InferenceResult:
    """Estimate the victim's ``beta`` and demand from its observed window.

    Returns the minimum-norm least-squares solution. ``determined`` reports
    whether ``beta_v`` is pinned down by the window (the remaining unknowns
    may stay ambiguous); ``residual`` is the squared misfit of the chosen
    formulation.
    """
    if obs.budget < 2:
        raise AttackWindowError("need at least 2 observed iterations")
    if method == "trajectory":
        A, rhs, n_unk = _trajectory_system(obs)
    elif method == "stacked":
        A, rhs, n_unk = _stacked_system(obs)
    else:
        raise ParameterError(f"unknown attack method {method!r}")
    x, rank, cond, determined = _solve(A, rhs)
    resid = float(np.sum((A @ x - rhs) ** 2))
    beta_hat = float(x[0])
    c_v = float(obs.c[obs.victim])
    warnings = []
    if cond > ILL_CONDITIONED:
        warnings.append(f"ill-conditioned system (condition number {cond:.3g})")
    if not determined:
        warnings.append("window does not identify beta; minimum-norm estimate returned")
    return InferenceResult(
        beta_hat=beta_hat,
        d_hat=float(beta_to_demand(beta_hat, c_v, obs.market)),
        residual=resid,
        determined=determined,
        rank=rank,
        unknowns=n_unk,
        condition=cond,
        warnings=warnings,
    )


@dataclass(frozen=True)
class AttackStats:
    count: int
    mse: float
    hit_rate: float
    min: float
    max: float
    mean: float
    median: float


def hits(samples, true_d: float, rel: float = 0.1) -> np.ndarray:
    samples = np.asarray(samples, dtype=float)
    return np.abs(samples - true_d) <= rel * abs(true_d) * (1 + 1e-12)


def attack_statistics(samples, true_d: float) -> AttackStats:
    """MSE and the fraction of estimates within 10% of the true demand."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ParameterError("no samples")
    return AttackStats(
        count=int(samples.size),
        mse=float(np.mean((samples - true_d) ** 2)),
        hit_rate=float(np.mean(hits(samples, true_d))),
        min=float(samples.min()),
        max=float(samples.max()),
        mean=float(samples.mean()),
        median=float(np.median(samples)),
    )
