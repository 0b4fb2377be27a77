"""Proximal operators and the projection onto valid Laplacians.

All operators act on dense arrays. The Laplacian projection runs Dykstra's
algorithm on two convex pieces:

* ``{Z symmetric, Z 1 = 0, Tr Z >= m}``, an affine subspace cut by a
  half-space, which has a closed-form projection, and
* ``{Z_ij <= 0 for i != j}``, an entrywise clamp.

Their intersection is exactly the set of Laplacians of nonnegatively
weighted graphs with trace at least ``m``. Such matrices are diagonally
dominant with nonnegative diagonal, so positive semidefiniteness comes for
free and needs no projection of its own.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ProjectionReport:
    iterations: int
    final_change: float
    feasible: bool


def _is_symmetric(M: np.ndarray, rtol: float = 1e-12) -> bool:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    return np.abs(M - M.T).max(initial=0.0) <= rtol * max(1.0, np.abs(M).max(initial=0.0))


def soft_threshold(M, tau: float) -> np.ndarray:
    """Entrywise ``sign(m) * max(|m| - tau, 0)``."""
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    M = np.asarray(M, dtype=float)
    return np.sign(M) * np.maximum(np.abs(M) - tau, 0.0)


def prox_nuclear(M, tau: float) -> np.ndarray:
    """Singular value thresholding, the prox of ``tau * ||.||_*``."""
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("prox_nuclear received non-finite entries")
    if tau == 0:
        return M.copy()
    if _is_symmetric(M):
        # singular values are |eigenvalues|; eigh is cheaper than svd
        w, Q = np.linalg.eigh((M + M.T) / 2.0)
        w = np.sign(w) * np.maximum(np.abs(w) - tau, 0.0)
        keep = w != 0
        Z = (Q[:, keep] * w[keep]) @ Q[:, keep].T
        return (Z + Z.T) / 2.0
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    keep = s > 0
    return (U[:, keep] * s[keep]) @ Vt[keep]


def prox_neg_logdet_quad(A, c: float, sym_tol: float = 1e-8) -> np.ndarray:
    """Minimize ``-log det T + (c/2) ||T - A||_F^2`` over positive definite ``T``.

    Stationarity ``c (T - A) = T^{-1}`` decouples in the eigenbasis of
    ``A``: each eigenvalue ``a`` maps to the positive root of
    ``c t^2 - c a t - 1 = 0``.
    """
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    A = np.asarray(A, dtype=float)
    scale = max(1.0, float(np.abs(A).max(initial=0.0)))
    if np.abs(A - A.T).max(initial=0.0) > sym_tol * scale:
        raise ValueError("prox_neg_logdet_quad requires a symmetric matrix")
    a, Q = np.linalg.eigh((A + A.T) / 2.0)
    t = (a + np.sqrt(a * a + 4.0 / c)) / 2.0
    # for very negative a the root loses precision; use the conjugate form
    neg = a < 0
    t[neg] = (2.0 / c) / (np.sqrt(a[neg] ** 2 + 4.0 / c) - a[neg])
    T = (Q * t) @ Q.T
    return (T + T.T) / 2.0


def _project_rowsum_trace(M: np.ndarray, m: float) -> np.ndarray:
    # symmetric M assumed; nearest symmetric zero-row-sum matrix is M - a 1^T - 1 a^T
    n = M.shape[0]
    r = M.sum(axis=1)
    a = (r - r.sum() / (2.0 * n)) / n
    Z = M - a[:, None] - a[None, :]
    tr = np.trace(Z)
    if tr < m and n > 1:
        # the normal of {Tr = m} inside that subspace is I - J/N, with squared norm N - 1
        shift = (m - tr) / (n - 1)
        Z = Z - shift / n
        Z[np.diag_indices(n)] += shift
    return Z


def _clamp_offdiag(M: np.ndarray) -> np.ndarray:
    Z = np.minimum(M, 0.0)
    np.fill_diagonal(Z, np.diag(M))
    return Z


def laplacian_set_violation(Z: np.ndarray, m: float) -> float:
    n = Z.shape[0]
    off = Z[~np.eye(n, dtype=bool)]
    return max(
        float(np.abs(Z.sum(axis=1)).max(initial=0.0)),
        float(off.max(initial=0.0)),
        float(m - np.trace(Z)),
        float(np.abs(Z - Z.T).max(initial=0.0)),
        0.0,
    )


def project_laplacian_set(
    M, m: float = 0.0, tol: float = 1e-8, max_iter: int = 5000
) -> tuple[np.ndarray, ProjectionReport]:
    """Euclidean projection of ``M`` onto Laplacians with trace at least ``m``.

    The input is symmetrized first (projection onto symmetric matrices
    commutes with the rest because every piece is symmetric). Iteration stops
    once a full Dykstra cycle moves the iterate by less than ``tol`` in
    Frobenius norm and the iterate violates no constraint by more than
    ``tol``.
    """
    Z, report, _ = dykstra_laplacian(M, m, tol=tol, max_iter=max_iter)
    return Z, report


def dykstra_laplacian(
    M, m: float = 0.0, tol: float = 1e-8, max_iter: int = 5000, q0=None
) -> tuple[np.ndarray, ProjectionReport, np.ndarray]:
    """Dykstra iteration for :func:`project_laplacian_set` with an explicit dual state.

    Dykstra's method is block coordinate ascent on the dual, so any
    increment ``q0`` for the affine piece is a valid starting point. Passing
    the ``q`` returned by a previous call on a nearby ``M`` cuts the number
    of cycles sharply inside iterative solvers.
    """
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("project_laplacian_set received non-finite entries")
    M = (M + M.T) / 2.0
    if q0 is None:
        x = _project_rowsum_trace(M, m)
        if laplacian_set_violation(x, m) <= tol:
            return x, ProjectionReport(0, 0.0, True), M - x
        q = np.zeros_like(M)
    else:
        q = np.array(q0, dtype=float)
    # invariant: x + p + q == M
    x = M - q
    p = np.zeros_like(M)
    change = np.inf
    for it in range(1, max_iter + 1):
        y = _clamp_offdiag(x + p)
        p = x + p - y
        x_new = _project_rowsum_trace(y + q, m)
        q = y + q - x_new
        change = float(np.linalg.norm(x_new - x))
        x = x_new
        if change < tol and laplacian_set_violation(x, m) <= tol:
            return x, ProjectionReport(it, change, True), q
    return x, ProjectionReport(max_iter, change, False), q
