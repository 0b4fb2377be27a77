"""Synthetic stochastic block model scenarios and anomaly-injection builders."""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .graph import EdgeSet, FeatureMatrix, GraphData, GraphValidationError, inject_anomalies

MAX_CONNECT_ATTEMPTS = 100


class DisconnectedGraphWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SbmConfig:
    n_communities: int = 4
    n_nodes: int = 80
    p_in: float = 0.6
    p_out: float = 0.05
    n_features: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.n_communities < 1 or self.n_nodes < 1 or self.n_features < 1:
            raise ValueError("n_communities, n_nodes and n_features must be positive")
        if self.n_communities > self.n_nodes:
            raise ValueError(
                f"{self.n_communities} communities do not fit in {self.n_nodes} nodes"
            )
        if self.n_features > self.n_nodes:
            raise ValueError(f"n_features {self.n_features} exceeds n_nodes {self.n_nodes}")
        for name in ("p_in", "p_out"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.p_out > self.p_in:
            raise ValueError(f"p_out={self.p_out} exceeds p_in={self.p_in} (not assortative)")


@dataclass(frozen=True, eq=False)
class Scenario:
    graph: GraphData
    clean_graph: GraphData
    features: FeatureMatrix
    truth: EdgeSet
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.features.check_pairs_with(self.graph)
        for i, j in self.truth:
            if self.graph.adjacency[i, j] == 0 or self.clean_graph.adjacency[i, j] != 0:
                raise GraphValidationError(f"truth edge ({i}, {j}) is inconsistent with the graphs")

    def fingerprint(self) -> str:
        """SHA-256 over every array and the truth set, for reproducibility checks."""
        h = hashlib.sha256()
        for arr in (self.graph.adjacency, self.clean_graph.adjacency, self.features.data):
            h.update(np.ascontiguousarray(arr).tobytes())
            h.update(str(arr.shape).encode())
        h.update(repr(self.truth.sorted()).encode())
        if self.labels is not None:
            h.update(np.asarray(self.labels, dtype=np.int64).tobytes())
        return h.hexdigest()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        return self.fingerprint() == other.fingerprint()

    __hash__ = None


def community_labels(n_nodes: int, n_communities: int) -> np.ndarray:
    """Contiguous blocks whose sizes differ by at most one; the first ``N mod C`` get the extra node."""
    base, extra = divmod(n_nodes, n_communities)
    sizes = [base + (c < extra) for c in range(n_communities)]
    return np.repeat(np.arange(n_communities), sizes)


def _sample_sbm(labels: np.ndarray, p_in: float, p_out: float, rng) -> np.ndarray:
    n = labels.size
    same = labels[:, None] == labels[None, :]
    prob = np.where(same, p_in, p_out)
    draws = rng.random((n, n)) < prob
    A = np.triu(draws, 1).astype(float)
    return A + A.T


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def generate_sbm(cfg: SbmConfig, seed=None) -> tuple[GraphData, np.ndarray]:
    """Sample a connected SBM graph; ``seed`` overrides ``cfg.seed`` when given."""
    ss = _seed_sequence(cfg.seed if seed is None else seed)
    labels = community_labels(cfg.n_nodes, cfg.n_communities)
    for child in ss.spawn(MAX_CONNECT_ATTEMPTS):
        A = _sample_sbm(labels, cfg.p_in, cfg.p_out, np.random.default_rng(child))
        n_comp, _ = connected_components(A, directed=False)
        if n_comp == 1:
            return GraphData(A), labels
    raise GraphValidationError(
        f"no connected SBM sample in {MAX_CONNECT_ATTEMPTS} attempts "
        f"(p_in={cfg.p_in}, p_out={cfg.p_out}); increase p_in or p_out"
    )


def spectral_features(L, n_features: int) -> FeatureMatrix:
    """Eigenvectors of the ``n_features`` smallest Laplacian eigenvalues, ascending.

    Each column is sign-normalized so its largest-magnitude entry is positive.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if not 1 <= n_features <= n:
        raise ValueError(f"n_features must be in [1, {n}], got {n_features}")
    w, Q = np.linalg.eigh((L + L.T) / 2.0)
    if n > 1 and w[1] < 1e-10:
        warnings.warn(
            "Laplacian has a repeated zero eigenvalue; graph is disconnected and "
            "the low eigenvectors are not unique",
            DisconnectedGraphWarning,
            stacklevel=2,
        )
    X = Q[:, :n_features].copy()
    pivots = np.argmax(np.abs(X), axis=0)
    signs = np.sign(X[pivots, np.arange(n_features)])
    signs[signs == 0] = 1.0
    return FeatureMatrix(X * signs)


def cross_community_non_edges(g: GraphData, labels: np.ndarray) -> EdgeSet:
    labels = np.asarray(labels)
    mask = np.triu((g.adjacency == 0) & (labels[:, None] != labels[None, :]), 1)
    i, j = np.nonzero(mask)
    return EdgeSet(zip(i.tolist(), j.tolist()))


def build_sbm_scenario(cfg: SbmConfig, k: int = 10, seed=None) -> Scenario:
    """SBM graph, spectral features of the clean graph, ``k`` cross-community anomalies.

    The graph and the injection draw from independent substreams of the
    master seed, so ``k`` does not influence the base graph.
    """
    graph_ss, inject_ss = _seed_sequence(cfg.seed if seed is None else seed).spawn(2)
    clean, labels = generate_sbm(cfg, seed=graph_ss)
    X = spectral_features(clean.laplacian, cfg.n_features)
    pool = cross_community_non_edges(clean, labels)
    if k > len(pool):
        raise GraphValidationError(
            f"only {len(pool)} cross-community non-edges available, cannot inject {k}"
        )
    perturbed, truth = inject_anomalies(clean, pool, k, np.random.default_rng(inject_ss))
    return Scenario(graph=perturbed, clean_graph=clean, features=X, truth=truth, labels=labels)


def build_attributed_scenario(g: GraphData, X: FeatureMatrix, k: int, seed) -> Scenario:
    """Inject ``k`` anomalies uniformly among all non-edges of a supplied attributed graph."""
    X.check_pairs_with(g)
    pool = g.non_edges()
    if k > len(pool):
        raise GraphValidationError(f"only {len(pool)} non-edges available, cannot inject {k}")
    perturbed, truth = inject_anomalies(g, pool, k, np.random.default_rng(_seed_sequence(seed)))
    return Scenario(graph=perturbed, clean_graph=g, features=X, truth=truth)


@dataclass(frozen=True)
class SbmScenarioBuilder:
    """Picklable ``seed -> Scenario`` factory for trial runners."""

    cfg: SbmConfig = SbmConfig()
    k: int = 10

    def __call__(self, seed) -> Scenario:
        return build_sbm_scenario(self.cfg, self.k, seed)


@dataclass(frozen=True, eq=False)
class AttributedScenarioBuilder:
    graph: GraphData
    features: FeatureMatrix
    k: int = 10

    def __call__(self, seed) -> Scenario:
        return build_attributed_scenario(self.graph, self.features, self.k, seed)
