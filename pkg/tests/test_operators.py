import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anomedge.graph import laplacian_from_adjacency, validate_laplacian
from anomedge.operators import (
    dykstra_laplacian,
    project_laplacian_set,
    prox_neg_logdet_quad,
    prox_nuclear,
    soft_threshold,
)
from oracles import brute_force_distance


def nuclear(M):
    return np.linalg.svd(M, compute_uv=False).sum()


class TestSoftThreshold:
    def test_shrinks(self):
        assert soft_threshold(np.array([3.0]), 1.0)[0] == 2.0

    def test_kills_small(self):
        assert soft_threshold(np.array([-0.5]), 1.0)[0] == 0.0

    def test_zero_tau_identity(self):
        M = np.random.default_rng(0).normal(size=(4, 3))
        np.testing.assert_array_equal(soft_threshold(M, 0.0), M)

    def test_negative_tau(self):
        with pytest.raises(ValueError):
            soft_threshold(np.ones(2), -0.1)

    def test_is_scalar_prox(self):
        grid = np.linspace(-5, 5, 200001)
        for m, tau in [(2.3, 0.7), (-1.1, 0.4), (0.2, 1.0)]:
            best = grid[np.argmin(tau * np.abs(grid) + 0.5 * (grid - m) ** 2)]
            assert soft_threshold(np.array([m]), tau)[0] == pytest.approx(best, abs=1e-4)


class TestProxNuclear:
    def test_zero_tau(self):
        M = np.random.default_rng(1).normal(size=(3, 3))
        np.testing.assert_allclose(prox_nuclear(M, 0.0), M)

    def test_diagonal(self):
        np.testing.assert_allclose(prox_nuclear(np.diag([3.0, 1.0]), 2.0), np.diag([1.0, 0.0]), atol=1e-12)

    def test_diagonal_3x3_nonsymmetric_path(self):
        M = np.diag([4.0, 2.5, 0.5])
        M_perm = M[[1, 2, 0]]  # non-symmetric, same singular values
        out = prox_nuclear(M_perm, 1.0)
        np.testing.assert_allclose(out, np.diag([3.0, 1.5, 0.0])[[1, 2, 0]], atol=1e-12)

    def test_rank_one(self):
        rng = np.random.default_rng(2)
        u = rng.normal(size=4)
        v = rng.normal(size=4)
        u /= np.linalg.norm(u)
        v /= np.linalg.norm(v)
        np.testing.assert_allclose(prox_nuclear(5 * np.outer(u, v), 2.0), 3 * np.outer(u, v), atol=1e-12)

    def test_symmetric_indefinite(self):
        M = np.diag([3.0, -2.0, 0.5])
        np.testing.assert_allclose(prox_nuclear(M, 1.0), np.diag([2.0, -1.0, 0.0]), atol=1e-12)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            prox_nuclear(np.array([[np.inf, 0], [0, 1]]), 1.0)

    @settings(max_examples=40)
    @given(st.integers(0, 2**31), st.floats(0.0, 3.0), st.booleans())
    def test_nonexpansive_and_shrinking(self, seed, tau, sym):
        rng = np.random.default_rng(seed)
        M1, M2 = rng.normal(size=(2, 5, 5))
        if sym:
            M1, M2 = M1 + M1.T, M2 + M2.T
        P1, P2 = prox_nuclear(M1, tau), prox_nuclear(M2, tau)
        assert np.linalg.norm(P1 - P2) <= np.linalg.norm(M1 - M2) + 1e-10
        assert nuclear(P1) <= nuclear(M1) + 1e-10
        assert np.linalg.matrix_rank(P1, tol=1e-9) <= np.linalg.matrix_rank(M1, tol=1e-9)

    @settings(max_examples=40)
    @given(st.integers(0, 2**31), st.floats(0.0, 3.0))
    def test_soft_threshold_nonexpansive(self, seed, tau):
        rng = np.random.default_rng(seed)
        M1, M2 = rng.normal(size=(2, 4, 6))
        d = np.linalg.norm(soft_threshold(M1, tau) - soft_threshold(M2, tau))
        assert d <= np.linalg.norm(M1 - M2) + 1e-12


class TestProxNegLogdet:
    def test_zero_input(self):
        np.testing.assert_allclose(prox_neg_logdet_quad(np.zeros((2, 2)), 1.0), np.eye(2), atol=1e-12)

    def test_identity_input(self):
        # positive root of 2 t^2 - 2 t - 1 = 0
        root = max(np.roots([2.0, -2.0, -1.0]).real)
        assert 2 * root**2 - 2 * root - 1 == pytest.approx(0, abs=1e-12)
        out = prox_neg_logdet_quad(np.eye(2), 2.0)
        np.testing.assert_allclose(out, root * np.eye(2), atol=1e-12)
        assert root == pytest.approx(1.3660254, abs=1e-7)

    def test_stationarity(self):
        rng = np.random.default_rng(5)
        B = rng.normal(size=(6, 6))
        A = B + B.T
        c = 0.7
        T = prox_neg_logdet_quad(A, c)
        np.testing.assert_allclose(c * (T - A), np.linalg.inv(T), atol=1e-8)

    def test_rejects_nonsymmetric(self):
        with pytest.raises(ValueError):
            prox_neg_logdet_quad(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0)

    @settings(max_examples=40)
    @given(st.integers(0, 2**31), st.floats(0.01, 100.0), st.floats(0.1, 1e3))
    def test_positive_definite(self, seed, c, scale):
        B = np.random.default_rng(seed).normal(size=(5, 5)) * scale
        T = prox_neg_logdet_quad(B + B.T, c)
        np.testing.assert_array_equal(T, T.T)
        assert np.linalg.eigvalsh(T).min() > 0


class TestProjectLaplacianSet:
    def test_identity_2x2(self):
        Z, rep = project_laplacian_set(np.eye(2), 0.0)
        np.testing.assert_allclose(Z, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-10)
        assert rep.feasible

    def test_swap_2x2(self):
        Z, _ = project_laplacian_set(np.array([[0.0, 1.0], [1.0, 0.0]]), 0.0)
        np.testing.assert_allclose(Z, np.zeros((2, 2)), atol=1e-10)

    def test_valid_input_is_fixed_point(self):
        A = np.array([[0, 1, 2, 0], [1, 0, 0, 1], [2, 0, 0, 0.5], [0, 1, 0.5, 0]], float)
        L = laplacian_from_adjacency(A)
        Z, rep = project_laplacian_set(L, m=np.trace(L) - 1)
        np.testing.assert_allclose(Z, L, atol=1e-8)
        assert rep.feasible

    @pytest.mark.parametrize("seed", range(6))
    @pytest.mark.parametrize("n", [2, 3])
    def test_matches_brute_force(self, n, seed):
        rng = np.random.default_rng(100 * n + seed)
        M = rng.normal(size=(n, n)) * 2
        m = [0.0, 1.5, 4.0][seed % 3]
        Z, rep = project_laplacian_set(M, m, tol=1e-10)
        assert rep.feasible
        assert np.linalg.norm(M - Z) == pytest.approx(brute_force_distance(M, m), abs=1e-4)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31), st.integers(2, 9), st.floats(0.0, 20.0))
    def test_output_feasible(self, seed, n, m):
        tol = 1e-8
        M = np.random.default_rng(seed).normal(size=(n, n)) * 3
        Z, rep = project_laplacian_set(M, m, tol=tol)
        assert rep.feasible
        assert rep.final_change <= tol
        assert np.abs(Z.sum(axis=1)).max() <= tol
        assert Z[~np.eye(n, dtype=bool)].max() <= tol
        assert np.trace(Z) >= m - tol
        assert np.linalg.eigvalsh((Z + Z.T) / 2).min() >= -10 * tol
        assert validate_laplacian(Z, tol=10 * tol).valid

    def test_max_iter_exhaustion_flags_infeasible(self):
        M = np.random.default_rng(7).normal(size=(12, 12)) * 5
        _, rep = project_laplacian_set(M, 3.0, tol=1e-14, max_iter=2)
        assert not rep.feasible
        assert rep.iterations == 2

    def test_warm_start_reaches_same_projection(self):
        rng = np.random.default_rng(8)
        M = rng.normal(size=(10, 10))
        _, _, q = dykstra_laplacian(M, 5.0, tol=1e-11)
        M2 = M + 0.01 * rng.normal(size=(10, 10))
        Z_warm, rep, _ = dykstra_laplacian(M2, 5.0, tol=1e-11, q0=q)
        Z_cold, _ = project_laplacian_set(M2, 5.0, tol=1e-11)
        assert rep.feasible
        np.testing.assert_allclose(Z_warm, Z_cold, atol=1e-8)
