"""Distributed Nash equilibrium seeking, exact and Laplace-perturbed.

Every prosumer ``i`` keeps an estimate ``y_i`` of the whole bid vector and
updates it synchronously from its neighbours' estimates::

    y_i(k+1) = y_i(k) - omega * sum_{j in N_i} (y_i(k) - y_j(k))
                      - alpha * f_i * (f_i . y_i(k) - (beta_i + gamma_i))

with ``gamma = 0`` in exact mode and one fixed Laplace draw per prosumer in
private mode. Stacked, this is the affine map ``y <- Q y + alpha F (beta + gamma)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernel as _kernel
from .errors import DivergenceError, ParameterError, StepSizeError
from .game import GameCoefficients
from .network import CommGraph, GraphSpectrum

DIVERGENCE_LIMIT = 1e12
LOG_RESIDUAL_FLOOR = -16.0
TRAJECTORY_SCHEMA = "dpnash-trajectory/1"


@dataclass(frozen=True)
class SeekConfig:
    """Iteration parameters.

    ``record_every`` is the stride between stored states (0 keeps only the
    initial and final state). ``min_iter`` suppresses the stopping test
    until that many updates have been made, which lets an attack window
    extend past the convergence point.
    """

    alpha: float
    tau: float = 1e-5
    max_iter: int = 200_000
    record_every: int = 1
    min_iter: int = 0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ParameterError(f"step size must be positive, got {self.alpha}")
        if not self.tau > 0:
            raise ParameterError(f"tolerance must be positive, got {self.tau}")
        if self.max_iter < 1:
            raise ParameterError("max_iter must be at least 1")
        if self.record_every < 0 or self.min_iter < 0:
            raise ParameterError("record_every and min_iter must be nonnegative")


@dataclass(frozen=True)
class NoiseRealization:
    gamma: np.ndarray
    sigma: float


@dataclass
class Trajectory:
    states: np.ndarray  # (n_recorded, I, I)
    recorded: np.ndarray  # iteration index of each stored state
    residuals: np.ndarray  # sum of row norms of y(k+1) - y(k), k = 0..iterations-1
    residuals_fro: np.ndarray
    converged: bool
    iterations: int
    noise: Optional[NoiseRealization] = None

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def count(self) -> int:
        return self.states.shape[1]

    def state_at(self, k: int) -> np.ndarray:
        idx = np.searchsorted(self.recorded, k)
        if idx >= len(self.recorded) or self.recorded[idx] != k:
            raise KeyError(f"iteration {k} was not recorded")
        return self.states[idx]

    def row_window(self, row: int, k1: int, k2: int) -> np.ndarray:
        """Estimates ``y_row(k)`` for ``k = k1..k2`` inclusive."""
        ks = np.arange(k1, k2 + 1)
        idx = np.searchsorted(self.recorded, ks)
        ok = idx < len(self.recorded)
        if not (ok.all() and np.array_equal(self.recorded[idx], ks)):
            raise KeyError(f"iterations {k1}..{k2} were not all recorded")
        return self.states[idx, row].copy()

    def own_bids(self) -> np.ndarray:
        """Each prosumer's bid read from its own final estimate."""
        return np.diag(self.final).copy()

    def to_csv(self, handle) -> None:
        write_trajectory_csv(self, handle)


def _neighbor_arrays(graph: CommGraph):
    ptr = [0]
    idx = []
    for i in range(graph.count):
        nb = graph.neighbors(i)
        idx.extend(int(j) for j in nb)
        ptr.append(len(idx))
    return np.asarray(ptr, dtype=np.int64), np.asarray(idx, dtype=np.int64)


def seek(
    coeffs: GameCoefficients,
    graph: CommGraph,
    config: SeekConfig,
    noise: Optional[NoiseRealization] = None,
    y0=None,
    backend=None,
) -> Trajectory:
    """Run the seeking iteration until the residual drops below ``config.tau``.

    Parameters
    ----------
    coeffs : GameCoefficients
    graph : CommGraph
    config : SeekConfig
    noise : NoiseRealization, optional
        Private mode: ``beta + noise.gamma`` replaces ``beta`` in every update.
    y0 : array_like, optional
        Initial ``(I, I)`` estimates, zeros by default.
    backend : str, optional
        ``"cython"`` or ``"python"``; default is the fastest available.

    Raises
    ------
    DivergenceError
        If an estimate leaves ``[-1e12, 1e12]``.
    """
    n = coeffs.count
    if graph.count != n:
        raise ParameterError(f"graph has {graph.count} nodes, game has {n} prosumers")
    impl = _kernel.get_backend(backend) if backend is not None else _kernel.BACKEND
    y = np.zeros((n, n)) if y0 is None else np.array(y0, dtype=float).reshape(n, n)
    y = np.ascontiguousarray(y)
    work = np.empty_like(y)
    target = np.array(coeffs.beta, dtype=float)
    if noise is not None:
        target = target + noise.gamma
    f = np.ascontiguousarray(coeffs.f)
    ptr, idx = _neighbor_arrays(graph)

    res_sum = np.empty(config.max_iter)
    res_fro = np.empty(config.max_iter)
    states = [y.copy()]
    recorded = [0]
    stride = config.record_every or config.max_iter
    k = 0
    status = 0
    while k < config.max_iter:
        steps = min(stride, config.max_iter - k)
        done, status, worst = impl.advance(
            y, work, ptr, idx, f, target, float(graph.omega), float(config.alpha),
            float(config.tau), steps, max(config.min_iter - k, 0),
            res_sum[k:], res_fro[k:], DIVERGENCE_LIMIT,
        )
        k += done
        if status == 2:
            raise DivergenceError(k, worst)
        if config.record_every or status == 1 or k >= config.max_iter:
            states.append(y.copy())
            recorded.append(k)
        if status == 1:
            break
    if recorded[-1] != k:
        states.append(y.copy())
        recorded.append(k)
    return Trajectory(
        states=np.array(states),
        recorded=np.array(recorded, dtype=np.int64),
        residuals=res_sum[:k].copy(),
        residuals_fro=res_fro[:k].copy(),
        converged=status == 1,
        iterations=k,
        noise=noise,
    )


def steady_state(coeffs: GameCoefficients, gamma=None) -> np.ndarray:
    """Fixed point of the (possibly perturbed) iteration, as a bid vector.

    All estimates agree at the fixed point, on the equilibrium of the game
    with ``beta + gamma``.
    """
    target = coeffs.beta if gamma is None else coeffs.beta + np.asarray(gamma)
    return np.linalg.solve(coeffs.f, target)


def step_size_bound(coeffs: GameCoefficients, spec: GraphSpectrum) -> float:
    """Largest admissible step size under the contraction assumption (exclusive)."""
    lam_hi, lam_lo = spec.lambda_max, spec.lambda_min
    if lam_hi >= 2:
        raise StepSizeError(f"largest consensus eigenvalue {lam_hi:.6g} >= 2; no step size works")
    f_hi = float(coeffs.f_norms.max())
    f_lo = float(coeffs.f_norms.min())
    first = (2 - lam_hi) / (3 * f_hi**2)
    if f_hi**4 - f_lo**4 > 0:
        second = lam_lo * f_lo**2 / (2 * (f_hi**4 - f_lo**4))
    else:
        second = math.inf
    bound = min(first, second)
    if not bound > 0:
        raise StepSizeError("step-size bound is not positive (is the graph connected and omega > 0?)")
    return bound


@dataclass(frozen=True)
class IterationMatrix:
    Q: np.ndarray
    F: np.ndarray
    m: float
    eigenvalues: np.ndarray = field(repr=False)


def stacking_matrix(coeffs: GameCoefficients) -> np.ndarray:
    """Block-diagonal ``(I*I, I)`` matrix with ``f_i`` in block ``i``."""
    n = coeffs.count
    F = np.zeros((n * n, n))
    for i in range(n):
        F[i * n:(i + 1) * n, i] = coeffs.f[i]
    return F


def build_iteration_matrix(coeffs: GameCoefficients, graph: CommGraph, alpha: float) -> IterationMatrix:
    n = coeffs.count
    F = stacking_matrix(coeffs)
    Q = np.eye(n * n) - np.kron(graph.laplacian, np.eye(n)) - alpha * F @ F.T
    eig = np.linalg.eigvalsh(Q)
    return IterationMatrix(Q=Q, F=F, m=float(np.abs(eig).max()), eigenvalues=eig)


def variance_bound(coeffs: GameCoefficients, m: float, alpha: float, sigma: float) -> float:
    """Stated bound on the limiting mean squared deviation from ``1 (x) b*``."""
    if not m < 1:
        raise StepSizeError(f"spectral radius {m} is not below 1")
    n = coeffs.count
    return 2 * alpha**2 * n * sigma**2 * float(coeffs.f_norms.max()) ** 2 / (1 - m**2)


def variance_bound_trace(coeffs: GameCoefficients, m: float, alpha: float, sigma: float) -> float:
    """Same bound with ``Tr(F^T F)`` in place of ``I * max ||f_i||^2``."""
    if not m < 1:
        raise StepSizeError(f"spectral radius {m} is not below 1")
    return 2 * alpha**2 * float(np.sum(coeffs.f_norms**2)) * sigma**2 / (1 - m**2)


def limiting_deviation(coeffs: GameCoefficients, sigma: float) -> float:
    """Exact ``E ||y(inf) - 1 (x) b*||^2`` for a fixed Laplace draw.

    The iteration converges to ``1 (x) (b* + (Id - mu)^-1 gamma)`` and
    ``E[gamma gamma^T] = 2 sigma^2 Id``.
    """
    inv = np.linalg.inv(coeffs.f)
    return coeffs.count * 2 * sigma**2 * float(np.sum(inv**2))


def residual_log(traj: Trajectory) -> np.ndarray:
    """``(k, log10 ||y(k+1) - y(k)||_F)`` per iteration, floored at -16."""
    if traj.iterations < 1:
        raise ParameterError("trajectory has no steps")
    with np.errstate(divide="ignore"):
        logs = np.log10(traj.residuals_fro)
    logs = np.maximum(logs, LOG_RESIDUAL_FLOOR)
    return np.column_stack([np.arange(traj.iterations), logs])


def _fmt(x) -> str:
    return "%.12g" % x


def write_trajectory_csv(traj: Trajectory, handle) -> None:
    """Write recorded states as CSV.

    Row for iteration ``k`` holds the residuals of the step that produced
    ``y(k)`` (``nan`` for ``k = 0``) and ``y(k)`` row-major.
    """
    n = traj.count
    writer = csv.writer(handle, lineterminator="\n")
    handle.write(f"# {TRAJECTORY_SCHEMA}\n")
    writer.writerow(
        ["iteration", "residual_sum", "residual_fro"]
        + [f"y_{i}_{j}" for i in range(n) for j in range(n)]
    )
    for k, state in zip(traj.recorded, traj.states):
        if k == 0:
            rs, rf = "nan", "nan"
        else:
            rs, rf = _fmt(traj.residuals[k - 1]), _fmt(traj.residuals_fro[k - 1])
        writer.writerow([int(k), rs, rf] + [_fmt(v) for v in state.ravel()])


def read_trajectory_csv(handle) -> Trajectory:
    """Inverse of :func:`write_trajectory_csv` (residuals only at recorded steps)."""
    lines = [ln for ln in handle if not ln.startswith("#")]
    reader = csv.reader(io.StringIO("".join(lines)))
    header = next(reader)
    n = int(round(math.sqrt(len(header) - 3)))
    if n * n != len(header) - 3:
        raise ParameterError("trajectory CSV does not hold a square state")
    ks, states, rs, rf = [], [], {}, {}
    for row in reader:
        if not row:
            continue
        k = int(row[0])
        ks.append(k)
        if k > 0:
            rs[k - 1], rf[k - 1] = float(row[1]), float(row[2])
        states.append(np.array([float(v) for v in row[3:]]).reshape(n, n))
    iterations = ks[-1] if ks else 0
    res = np.full(iterations, np.nan)
    res_f = np.full(iterations, np.nan)
    for k, v in rs.items():
        res[k] = v
        res_f[k] = rf[k]
    return Trajectory(
        states=np.array(states),
        recorded=np.array(ks, dtype=np.int64),
        residuals=res,
        residuals_fro=res_f,
        converged=False,
        iterations=iterations,
    )
