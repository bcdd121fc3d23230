"""Communication graphs between prosumers and their consensus spectra."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import GraphError

ZERO_EIG_TOL = 1e-10


@dataclass(frozen=True)
class CommGraph:
    """Undirected, connected graph with a uniform consensus weight ``omega``.

    The weight must satisfy ``0 <= omega <= 1 / (1 + max degree)``.
    """

    adjacency: np.ndarray
    omega: float

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=float)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise GraphError("adjacency must be a square matrix")
        if adj.shape[0] < 2:
            raise GraphError("need at least 2 nodes")
        if not np.array_equal(adj, adj.T):
            raise GraphError("adjacency must be symmetric")
        if np.any(np.diag(adj) != 0):
            raise GraphError("self-loops are not allowed")
        if not np.all((adj == 0) | (adj == 1)):
            raise GraphError("adjacency entries must be 0 or 1")
        ncomp, _ = connected_components(adj, directed=False)
        if ncomp != 1:
            raise GraphError(f"graph is disconnected ({ncomp} components)")
        bound = weight_bound(adj.sum(axis=1).max())
        if not 0 <= self.omega <= bound:
            raise GraphError(
                f"consensus weight {self.omega} outside [0, {bound:.6g}] "
                f"for max degree {int(adj.sum(axis=1).max())}"
            )
        object.__setattr__(self, "adjacency", adj)

    @property
    def count(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])

    @property
    def edges(self) -> list:
        rows, cols = np.nonzero(np.triu(self.adjacency, 1))
        return [(int(i), int(j)) for i, j in zip(rows, cols)]

    @cached_property
    def laplacian(self) -> np.ndarray:
        """Weighted Laplacian ``omega * (diag(deg) - adjacency)``."""
        return self.omega * (np.diag(self.degrees) - self.adjacency)

    def is_complete(self) -> bool:
        return bool(np.all(self.degrees == self.count - 1))

    def to_dict(self) -> dict:
        if self.is_complete():
            return {"type": "fully_connected", "count": self.count, "omega": self.omega}
        return {"type": "edges", "count": self.count, "edges": self.edges, "omega": self.omega}


def weight_bound(max_degree) -> float:
    return 1.0 / (1.0 + float(max_degree))


def fully_connected(count: int, omega: float) -> CommGraph:
    if count < 2:
        raise GraphError("need at least 2 nodes")
    return CommGraph(np.ones((count, count)) - np.eye(count), omega)


def from_edges(count: int, edges: Iterable, omega: float) -> CommGraph:
    adj = np.zeros((count, count))
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j:
            raise GraphError(f"self-loop at node {i}")
        if not (0 <= i < count and 0 <= j < count):
            raise GraphError(f"edge ({i}, {j}) references a node outside 0..{count - 1}")
        adj[i, j] = adj[j, i] = 1.0
    return CommGraph(adj, omega)


def graph_from_dict(spec, count: int, omega=None) -> CommGraph:
    """Build a graph from its JSON form.

    Accepts ``"fully_connected"`` or a mapping with ``type`` in
    ``{"fully_connected", "edges"}``; ``omega`` in the mapping overrides the
    argument.
    """
    if isinstance(spec, str):
        spec = {"type": spec}
    spec = dict(spec)
    omega = spec.get("omega", omega)
    if omega is None:
        raise GraphError("consensus weight omega not given")
    kind = spec.get("type", "edges" if "edges" in spec else "fully_connected")
    count = int(spec.get("count", count))
    if kind == "fully_connected":
        return fully_connected(count, float(omega))
    if kind == "edges":
        return from_edges(count, spec["edges"], float(omega))
    raise GraphError(f"unknown graph type {kind!r}")


@dataclass(frozen=True)
class GraphSpectrum:
    eigenvalues: np.ndarray

    @property
    def lambda_max(self) -> float:
        """Largest nonzero-mode eigenvalue."""
        return float(self.eigenvalues[1:].max())

    @property
    def lambda_min(self) -> float:
        """Smallest nonzero-mode eigenvalue (algebraic connectivity times omega)."""
        return float(self.eigenvalues[1:].min())

    @property
    def connected(self) -> bool:
        return bool(self.eigenvalues[1] > ZERO_EIG_TOL)


def spectrum(graph: CommGraph) -> GraphSpectrum:
    eig = np.linalg.eigvalsh(graph.laplacian)
    # the smallest eigenvalue is exactly zero; clean roundoff
    if abs(eig[0]) < ZERO_EIG_TOL:
        eig[0] = 0.0
    return GraphSpectrum(np.sort(eig))
