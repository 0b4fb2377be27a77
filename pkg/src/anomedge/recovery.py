"""Joint anomaly identification and nominal Laplacian recovery by ADMM.

Problem solved::

    min_{R, S, T > 0}  ||L - S - R||_F^2 + lam ||S||_1 + mu ||R||_*
                       + alpha (Tr(X X^T T) - log det T + beta ||T||_1)
                       + kappa ||R - T||_F^2
    s.t.  Tr R >= m,  R 1 = 0,  R_ij <= 0 (i != j)

Splitting: consensus copies ``Z1 = R`` (nuclear norm), ``Z2 = R``
(Laplacian constraint set) and ``W = T`` (l1 on T), with scaled duals.
The first block ``(S, R, T)`` is minimized by Gauss-Seidel sweeps, each of
which has a closed form; the second block ``(Z1, Z2, W)`` separates into
three exact prox/projection steps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .als import SolverDivergedError
from .operators import (
    _is_symmetric,
    dykstra_laplacian,
    project_laplacian_set,
    prox_neg_logdet_quad,
    prox_nuclear,
    soft_threshold,
)

log = logging.getLogger(__name__)


def default_trace_floor(L_pert, anomaly_budget: int | None = 10) -> float:
    """Trace floor ``m``: unit-weight edges carry 2 units of trace each."""
    tr = float(np.trace(L_pert))
    if anomaly_budget is None:
        return max(0.0, 0.8 * tr)
    return max(0.0, tr - 2.0 * anomaly_budget)


@dataclass(frozen=True)
class RecoveryParams:
    lam: float = 1.0
    mu: float = 0.1
    alpha: float = 1.0
    beta: float = 0.1
    kappa: float = 1.0
    trace_floor: float | None = None
    anomaly_budget: int | None = 10
    rho: float = 1.0
    max_iters: int = 2000
    res_tol: float = 1e-5
    inner_sweeps: int = 1
    relaxation: float = 1.0
    proj_tol: float = 1e-9
    track_objective: bool = True

    def __post_init__(self):
        for name in ("lam", "mu", "alpha", "beta", "kappa", "rho", "res_tol", "proj_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.trace_floor is not None and self.trace_floor < 0:
            raise ValueError(f"trace_floor must be nonnegative, got {self.trace_floor}")
        if self.max_iters < 1 or self.inner_sweeps < 1:
            raise ValueError("max_iters and inner_sweeps must be positive")
        if not 0.0 < self.relaxation < 2.0:
            raise ValueError(f"relaxation must lie in (0, 2), got {self.relaxation}")

    def floor_for(self, L_pert) -> float:
        if self.trace_floor is not None:
            return float(self.trace_floor)
        return default_trace_floor(L_pert, self.anomaly_budget)


@dataclass
class RecoveryResult:
    R: np.ndarray
    S: np.ndarray
    Theta: np.ndarray
    R_raw: np.ndarray
    trace_floor: float
    primal_residuals: list[float] = field(default_factory=list)
    dual_residuals: list[float] = field(default_factory=list)
    objective_history: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def residual_part(L_pert, result: RecoveryResult) -> np.ndarray:
    return np.asarray(L_pert, dtype=float) - result.R - result.S


def _nuclear_norm(R: np.ndarray) -> float:
    if _is_symmetric(R):
        return float(np.abs(np.linalg.eigvalsh(R)).sum())
    return float(np.linalg.svd(R, compute_uv=False).sum())


def _logdet_pd(T: np.ndarray) -> float:
    w = np.linalg.eigvalsh((T + T.T) / 2.0)
    if w.min() <= 0:
        raise ValueError(f"Theta is not positive definite (min eigenvalue {w.min():.3g})")
    return float(np.sum(np.log(w)))


def objective_recovery(L_pert, R, S, Theta, X, params: RecoveryParams) -> float:
    L_pert, R, S, Theta, X = (np.asarray(a, dtype=float) for a in (L_pert, R, S, Theta, X))
    if X.ndim == 1:
        X = X[:, None]
    resid = L_pert - S - R
    XtT = X.T @ Theta
    # Tr(X X^T T) = Tr(X^T T X)
    lik = float(np.sum(XtT.T * X)) - _logdet_pd(Theta) + params.beta * np.abs(Theta).sum()
    return float(
        np.sum(resid * resid)
        + params.lam * np.abs(S).sum()
        + params.mu * _nuclear_norm(R)
        + params.alpha * lik
        + params.kappa * np.sum((R - Theta) ** 2)
    )


def solve_recovery(L_pert, X, params: RecoveryParams = RecoveryParams()) -> RecoveryResult:
    L_pert = np.asarray(L_pert, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = L_pert.shape[0]
    if L_pert.shape != (n, n):
        raise ValueError(f"L must be square, got {L_pert.shape}")
    if np.abs(L_pert - L_pert.T).max(initial=0.0) > 1e-9 * max(1.0, np.abs(L_pert).max()):
        raise ValueError("perturbed Laplacian must be symmetric")
    if X.shape[0] != n:
        raise ValueError(f"X has {X.shape[0]} rows, expected {n}")

    lam, mu, alpha, beta, kappa, rho = (
        params.lam, params.mu, params.alpha, params.beta, params.kappa, params.rho
    )
    m = params.floor_for(L_pert)
    C = X @ X.T
    c_theta = (2.0 * kappa + rho) / alpha

    R, _, q = dykstra_laplacian(L_pert, m, tol=params.proj_tol)
    S = np.zeros_like(L_pert)
    Theta = np.eye(n)
    Z1, Z2, W = R.copy(), R.copy(), Theta.copy()
    U1, U2, U3 = np.zeros_like(R), np.zeros_like(R), np.zeros_like(R)

    primal, dual, history = [], [], []
    converged = False
    it = 0
    for it in range(1, params.max_iters + 1):
        for _ in range(params.inner_sweeps):
            S = soft_threshold(L_pert - R, lam / 2.0)
            R = (2.0 * (L_pert - S) + 2.0 * kappa * Theta + rho * (Z1 - U1) + rho * (Z2 - U2)) / (
                2.0 + 2.0 * kappa + 2.0 * rho
            )
            A_bar = (2.0 * kappa * R + rho * (W - U3) - alpha * C) / (2.0 * kappa + rho)
            Theta = prox_neg_logdet_quad((A_bar + A_bar.T) / 2.0, c_theta)

        # over-relaxed copies (relaxation = 1 is plain ADMM)
        a = params.relaxation
        R_hat = a * R + (1.0 - a) * Z1 if a != 1.0 else R
        R_hat2 = a * R + (1.0 - a) * Z2 if a != 1.0 else R
        T_hat = a * Theta + (1.0 - a) * W if a != 1.0 else Theta

        Z1_old, Z2_old, W_old = Z1, Z2, W
        Z1 = prox_nuclear(R_hat + U1, mu / rho)
        Z2, rep, q = dykstra_laplacian(R_hat2 + U2, m, tol=params.proj_tol, q0=q)
        W = soft_threshold(T_hat + U3, alpha * beta / rho)

        U1 += R_hat - Z1
        U2 += R_hat2 - Z2
        U3 += T_hat - W
        g1, g2, g3 = R - Z1, R - Z2, Theta - W

        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(Theta))):
            raise SolverDivergedError(f"ADMM iterate became non-finite at iteration {it}")

        r_norm = np.sqrt(np.sum(g1 * g1) + np.sum(g2 * g2) + np.sum(g3 * g3))
        s_norm = rho * np.sqrt(
            np.sum((Z1 - Z1_old) ** 2) + np.sum((Z2 - Z2_old) ** 2) + np.sum((W - W_old) ** 2)
        )
        x_scale = np.sqrt(2.0 * np.sum(R * R) + np.sum(Theta * Theta))
        z_scale = np.sqrt(np.sum(Z1 * Z1) + np.sum(Z2 * Z2) + np.sum(W * W))
        u_scale = rho * np.sqrt(np.sum(U1 * U1) + np.sum(U2 * U2) + np.sum(U3 * U3))
        r_rel = r_norm / max(x_scale, z_scale, 1e-12)
        s_rel = s_norm / max(u_scale, 1e-12)
        primal.append(float(r_rel))
        dual.append(float(s_rel))
        if params.track_objective:
            history.append(objective_recovery(L_pert, R, S, Theta, X, params))
        if r_rel < params.res_tol and s_rel < params.res_tol:
            converged = True
            break

    R_final, rep = project_laplacian_set(R, m, tol=params.proj_tol)
    log.debug(
        "recovery ADMM stopped after %d iterations (converged=%s, r=%.2g, s=%.2g)",
        it, converged, primal[-1], dual[-1],
    )
    return RecoveryResult(
        R=R_final,
        S=S,
        Theta=Theta,
        R_raw=R,
        trace_floor=m,
        primal_residuals=primal,
        dual_residuals=dual,
        objective_history=history,
        iterations=it,
        converged=converged,
    )


@dataclass
class GraphicalLassoResult:
    theta: np.ndarray
    sparse_theta: np.ndarray
    iterations: int
    converged: bool


def solve_graphical_lasso(
    X, beta: float, rho: float = 1.0, max_iters: int = 2000, res_tol: float = 1e-6
) -> GraphicalLassoResult:
    """Sparse precision estimate minimizing ``Tr(X X^T T) - log det T + beta ||T||_1``.

    Here the nodes are the variables, so the "sample covariance" is the
    N x N Gram matrix ``X X^T``. The l1 term includes the diagonal.
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    C = X @ X.T
    T = np.eye(n)
    W = T.copy()
    U = np.zeros_like(T)
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        T = prox_neg_logdet_quad(W - U - C / rho, rho)
        W_old = W
        W = soft_threshold(T + U, beta / rho)
        U += T - W
        r = np.linalg.norm(T - W) / max(np.linalg.norm(T), np.linalg.norm(W), 1e-12)
        s = rho * np.linalg.norm(W - W_old) / max(rho * np.linalg.norm(U), 1e-12)
        if r < res_tol and s < res_tol:
            converged = True
            break
    return GraphicalLassoResult(theta=T, sparse_theta=W, iterations=it, converged=converged)
