"""Alternating least squares for the smoothness-regularized low-rank + sparse split.

The objective is

    f(U, V, S) = ||L - S - U V^T||_F^2 + lam ||S||_1
                 + mu (||U||_F^2 + ||V||_F^2) + gamma Tr(X^T U V^T X)

Each block has a closed-form minimizer given the other two. Setting the
gradient in ``U`` to zero,

    -2 (M - U V^T) V + 2 mu U + gamma X X^T V = 0,    M = L - S,

gives ``U = (M V - gamma/2 X X^T V)(V^T V + mu I)^{-1}``; the ``V`` update is
the mirror image with ``M^T``. The ``S`` update is entrywise soft
thresholding of ``L - U V^T`` at ``lam / 2``. With ``gamma = 0`` the solver
is the plain factorized low-rank + sparse baseline.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import ceil, sqrt

import numpy as np

from .operators import soft_threshold

log = logging.getLogger(__name__)


class SolverDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class AlsParams:
    lam: float = 1.0
    mu: float = 1.0
    gamma: float = 0.0
    rank_bound: int | None = None
    max_iters: int = 500
    rel_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")
        if self.rank_bound is not None and self.rank_bound < 1:
            raise ValueError(f"rank_bound must be positive, got {self.rank_bound}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be positive, got {self.max_iters}")
        if self.rel_tol <= 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")

    def rank_for(self, n: int) -> int:
        r = self.rank_bound if self.rank_bound is not None else ceil(sqrt(n))
        if r > n:
            raise ValueError(f"rank_bound {r} exceeds the number of nodes {n}")
        return r


@dataclass
class AlsResult:
    S: np.ndarray
    U: np.ndarray
    V: np.ndarray
    objective_history: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    @property
    def low_rank(self) -> np.ndarray:
        return self.U @ self.V.T


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite input to ALS block update")


def objective_f(L_pert, S, U, V, X, params: AlsParams) -> float:
    L_pert, S, U, V, X = (np.asarray(a, dtype=float) for a in (L_pert, S, U, V, X))
    n = L_pert.shape[0]
    if S.shape != L_pert.shape or U.shape[0] != n or V.shape[0] != n or U.shape[1] != V.shape[1]:
        raise ValueError(
            f"dimension mismatch: L {L_pert.shape}, S {S.shape}, U {U.shape}, V {V.shape}"
        )
    if X.shape[0] != n:
        raise ValueError(f"X has {X.shape[0]} rows, expected {n}")
    R = U @ V.T
    resid = L_pert - S - R
    # Tr(X^T U V^T X) = <U^T X, V^T X>
    smooth = np.sum((U.T @ X) * (V.T @ X))
    return float(
        np.sum(resid * resid)
        + params.lam * np.abs(S).sum()
        + params.mu * (np.sum(U * U) + np.sum(V * V))
        + params.gamma * smooth
    )


def update_U(M, V, X, mu: float, gamma: float) -> np.ndarray:
    """Exact minimizer of the objective in ``U`` for ``M = L - S``."""
    _check_finite(M, V, X)
    r = V.shape[1]
    rhs = M @ V
    if gamma:
        rhs = rhs - (gamma / 2.0) * (X @ (X.T @ V))
    G = V.T @ V + mu * np.eye(r)
    # G is symmetric positive definite, solve U G = rhs
    return np.linalg.solve(G, rhs.T).T


def update_V(M, U, X, mu: float, gamma: float) -> np.ndarray:
    """Exact minimizer of the objective in ``V`` for ``M = L - S``."""
    return update_U(np.asarray(M).T, U, X, mu, gamma)


def update_S(L_pert, U, V, lam: float) -> np.ndarray:
    return soft_threshold(np.asarray(L_pert) - U @ V.T, lam / 2.0)


def init_factors(L_pert: np.ndarray, rank: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Seeded Gaussian factors scaled so that ``U V^T`` starts near ``||L||_F``."""
    n = L_pert.shape[0]
    rng = np.random.default_rng(seed)
    sd = sqrt(np.linalg.norm(L_pert) / (n * rank)) if n else 0.0
    U = rng.normal(scale=sd, size=(n, rank))
    V = rng.normal(scale=sd, size=(n, rank))
    return U, V


def solve_als(L_pert, X, params: AlsParams, init=None, callback=None) -> AlsResult:
    """Cyclic U -> V -> S block minimization.

    Stops when the relative objective decrease between sweeps falls below
    ``params.rel_tol``. ``init`` may supply ``(U, V, S)`` to bypass the seeded
    start; ``callback(it, U, V, S)`` is called after every sweep.
    """
    L_pert = np.asarray(L_pert, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = L_pert.shape[0]
    if L_pert.shape != (n, n):
        raise ValueError(f"L must be square, got {L_pert.shape}")
    if X.shape[0] != n:
        raise ValueError(f"X has {X.shape[0]} rows, expected {n}")
    rank = params.rank_for(n)
    if init is None:
        U, V = init_factors(L_pert, rank, params.seed)
        S = np.zeros_like(L_pert)
    else:
        U, V, S = (np.array(a, dtype=float) for a in init)

    with np.errstate(over="ignore", invalid="ignore"):
        history = [objective_f(L_pert, S, U, V, X, params)]
    if not np.isfinite(history[0]):
        raise SolverDivergedError("ALS objective is non-finite at iteration 0 (initial point)")
    converged = False
    it = 0
    for it in range(1, params.max_iters + 1):
        M = L_pert - S
        with np.errstate(over="ignore", invalid="ignore"):
            U = update_U(M, V, X, params.mu, params.gamma)
            if not np.all(np.isfinite(U)):
                raise SolverDivergedError(f"ALS factor U became non-finite at iteration {it}")
            V = update_V(M, U, X, params.mu, params.gamma)
            if not np.all(np.isfinite(V)):
                raise SolverDivergedError(f"ALS factor V became non-finite at iteration {it}")
            S = update_S(L_pert, U, V, params.lam)
            obj = objective_f(L_pert, S, U, V, X, params)
        if not np.isfinite(obj):
            raise SolverDivergedError(f"ALS objective became non-finite at iteration {it}")
        history.append(obj)
        if callback is not None:
            callback(it, U, V, S)
        prev = history[-2]
        if abs(prev - obj) <= params.rel_tol * max(abs(prev), 1e-12):
            converged = True
            break
    log.debug("ALS stopped after %d sweeps, objective %.6g", it, history[-1])
    return AlsResult(S=S, U=U, V=V, objective_history=history, iterations=it, converged=converged)
