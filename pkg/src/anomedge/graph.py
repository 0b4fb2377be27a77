"""Graph containers, Laplacian algebra and anomaly injection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

Edge = tuple[int, int]


class GraphValidationError(ValueError):
    """Raised when a matrix or edge set violates a structural precondition."""


def _as_square(M, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise GraphValidationError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        i, j = np.argwhere(~np.isfinite(M))[0]
        raise GraphValidationError(f"{name} has a non-finite entry at ({i}, {j})")
    return M


def check_adjacency(A) -> np.ndarray:
    """Validate a symmetric, nonnegative, loop-free adjacency and return it as float array."""
    A = _as_square(A, "adjacency")
    asym = np.argwhere(A != A.T)
    if asym.size:
        i, j = asym[0]
        raise GraphValidationError(
            f"adjacency is not symmetric at ({i}, {j}): {A[i, j]} != {A[j, i]}"
        )
    neg = np.argwhere(A < 0)
    if neg.size:
        i, j = neg[0]
        raise GraphValidationError(f"adjacency has a negative entry at ({i}, {j}): {A[i, j]}")
    loops = np.flatnonzero(np.diag(A))
    if loops.size:
        i = loops[0]
        raise GraphValidationError(f"adjacency has a self-loop at ({i}, {i})")
    return A


def laplacian_from_adjacency(A) -> np.ndarray:
    """Combinatorial Laplacian ``diag(A 1) - A``."""
    A = check_adjacency(A)
    return np.diag(A.sum(axis=1)) - A


def adjacency_from_laplacian(L, tol: float = 1e-6) -> np.ndarray:
    """Read edge weights back off a (nearly) valid Laplacian.

    The input is symmetrized first and positive off-diagonal entries are
    clamped to zero, so slightly infeasible solver output still maps to a
    valid adjacency.
    """
    L = _as_square(L, "laplacian")
    asym = np.abs(L - L.T)
    if asym.max(initial=0.0) > tol:
        i, j = np.unravel_index(np.argmax(asym), asym.shape)
        raise GraphValidationError(
            f"laplacian asymmetry {asym[i, j]:.3g} at ({i}, {j}) exceeds tol={tol:g}"
        )
    A = np.maximum(0.0, -(L + L.T) / 2.0)
    np.fill_diagonal(A, 0.0)
    return A


def smoothness(X, L) -> float:
    """Laplacian quadratic form Tr(X^T L X)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1] or L.shape[0] != X.shape[0]:
        raise GraphValidationError(
            f"dimension mismatch: X has {X.shape[0]} rows, L has shape {L.shape}"
        )
    return float(np.sum(X * (L @ X)))


@dataclass(frozen=True)
class LaplacianReport:
    max_row_sum: float
    max_positive_offdiag: float
    max_asymmetry: float
    min_eigenvalue: float
    tol: float

    @property
    def valid(self) -> bool:
        return (
            self.max_row_sum <= self.tol
            and self.max_positive_offdiag <= self.tol
            and self.max_asymmetry <= self.tol
            and self.min_eigenvalue >= -self.tol
        )


def validate_laplacian(L, tol: float = 1e-8) -> LaplacianReport:
    """Measure how far ``L`` is from being a valid combinatorial Laplacian."""
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    off = L[~np.eye(n, dtype=bool)]
    sym = (L + L.T) / 2.0
    return LaplacianReport(
        max_row_sum=float(np.abs(L.sum(axis=1)).max(initial=0.0)),
        max_positive_offdiag=float(max(off.max(initial=0.0), 0.0)),
        max_asymmetry=float(np.abs(L - L.T).max(initial=0.0)),
        min_eigenvalue=float(np.linalg.eigvalsh(sym).min()) if n else 0.0,
        tol=tol,
    )


class EdgeSet(frozenset):
    """Immutable set of undirected edges stored as ``(i, j)`` with ``i < j``."""

    def __new__(cls, edges: Iterable[Edge] = ()):
        canon = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise GraphValidationError(f"self-loop ({i}, {j}) in edge set")
            canon.add((min(i, j), max(i, j)))
        return super().__new__(cls, canon)

    def sorted(self) -> list[Edge]:
        return sorted(self)

    def __repr__(self) -> str:
        return f"EdgeSet({self.sorted()})"


@dataclass(frozen=True, eq=False)
class GraphData:
    """Undirected weighted graph with its cached Laplacian."""

    adjacency: np.ndarray
    laplacian: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = check_adjacency(self.adjacency).copy()
        A.setflags(write=False)
        L = np.diag(A.sum(axis=1)) - A
        L.setflags(write=False)
        object.__setattr__(self, "adjacency", A)
        object.__setattr__(self, "laplacian", L)

    @classmethod
    def from_edges(cls, n_nodes: int, edges: Iterable, weight: float = 1.0) -> "GraphData":
        A = np.zeros((n_nodes, n_nodes))
        for e in edges:
            i, j = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else weight
            if i == j:
                raise GraphValidationError(f"self-loop at node {i}")
            if not (0 <= i < n_nodes and 0 <= j < n_nodes):
                raise GraphValidationError(f"edge ({i}, {j}) out of range for {n_nodes} nodes")
            A[i, j] = A[j, i] = w
        return cls(A)

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self.adjacency, 1)))

    def edges(self) -> EdgeSet:
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return EdgeSet(zip(i.tolist(), j.tolist()))

    def non_edges(self) -> EdgeSet:
        n = self.n_nodes
        mask = np.triu(self.adjacency == 0, 1)
        i, j = np.nonzero(mask)
        return EdgeSet(zip(i.tolist(), j.tolist())) if n else EdgeSet()

    def __eq__(self, other) -> bool:
        if not isinstance(other, GraphData):
            return NotImplemented
        return np.array_equal(self.adjacency, other.adjacency)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """N x F nodal attribute matrix."""

    data: np.ndarray

    def __post_init__(self):
        X = np.array(self.data, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise GraphValidationError(f"feature matrix must be 2-D, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            i, j = np.argwhere(~np.isfinite(X))[0]
            raise GraphValidationError(f"feature matrix has a non-finite entry at ({i}, {j})")
        X.setflags(write=False)
        object.__setattr__(self, "data", X)

    @property
    def n_nodes(self) -> int:
        return self.data.shape[0]

    @property
    def n_features(self) -> int:
        return self.data.shape[1]

    def check_pairs_with(self, g: GraphData) -> None:
        if self.n_nodes != g.n_nodes:
            raise GraphValidationError(
                f"feature matrix has {self.n_nodes} rows but the graph has {g.n_nodes} nodes"
            )

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    __hash__ = None


def inject_anomalies(
    g: GraphData, candidate_pairs: Iterable[Edge], k: int, seed
) -> tuple[GraphData, EdgeSet]:
    """Add ``k`` unit-weight edges drawn uniformly without replacement from ``candidate_pairs``.

    ``seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    if k < 0:
        raise GraphValidationError(f"anomaly count must be nonnegative, got {k}")
    pool = EdgeSet(candidate_pairs).sorted()
    A = g.adjacency
    for i, j in pool:
        if A[i, j] != 0:
            raise GraphValidationError(f"candidate pair ({i}, {j}) is already an edge")
    if k > len(pool):
        raise GraphValidationError(
            f"cannot inject {k} anomalies from only {len(pool)} candidate pairs"
        )
    if k == 0:
        return g, EdgeSet()
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(pool), size=k, replace=False)
    chosen = [pool[p] for p in sorted(picks.tolist())]
    A_new = A.copy()
    for i, j in chosen:
        A_new[i, j] = A_new[j, i] = 1.0
    return GraphData(A_new), EdgeSet(chosen)
