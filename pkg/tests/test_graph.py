import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anomedge.datagen import SbmConfig, community_labels, cross_community_non_edges, generate_sbm
from anomedge.graph import (
    EdgeSet,
    FeatureMatrix,
    GraphData,
    GraphValidationError,
    adjacency_from_laplacian,
    inject_anomalies,
    laplacian_from_adjacency,
    smoothness,
    validate_laplacian,
)


def random_adjacency(rng, n, p=0.5, weighted=False):
    A = np.triu(rng.random((n, n)) < p, 1).astype(float)
    if weighted:
        A *= rng.uniform(0.1, 3.0, size=(n, n))
    return A + A.T


@st.composite
def adjacencies(draw, max_n=8):
    n = draw(st.integers(1, max_n))
    seed = draw(st.integers(0, 2**31))
    weighted = draw(st.booleans())
    return random_adjacency(np.random.default_rng(seed), n, 0.5, weighted)


class TestLaplacian:
    def test_single_edge(self):
        L = laplacian_from_adjacency([[0, 1], [1, 0]])
        np.testing.assert_array_equal(L, [[1, -1], [-1, 1]])

    def test_empty_graph(self):
        np.testing.assert_array_equal(laplacian_from_adjacency(np.zeros((3, 3))), np.zeros((3, 3)))

    def test_triangle(self):
        A = np.ones((3, 3)) - np.eye(3)
        L = laplacian_from_adjacency(A)
        np.testing.assert_array_equal(L, 2 * np.eye(3) - A)

    def test_rejects_asymmetric_with_index(self):
        A = np.zeros((3, 3))
        A[0, 2] = 1
        with pytest.raises(GraphValidationError, match=r"\(0, 2\)"):
            laplacian_from_adjacency(A)

    def test_rejects_negative_with_index(self):
        A = np.zeros((3, 3))
        A[1, 2] = A[2, 1] = -1
        with pytest.raises(GraphValidationError, match=r"\(1, 2\)"):
            laplacian_from_adjacency(A)

    def test_rejects_self_loop(self):
        with pytest.raises(GraphValidationError, match="self-loop"):
            GraphData(np.eye(2))

    @given(adjacencies())
    def test_row_sums_and_signs(self, A):
        L = laplacian_from_adjacency(A)
        assert np.abs(L.sum(axis=1)).max() <= 1e-12
        off = L[~np.eye(len(L), dtype=bool)]
        assert np.all(off <= 0)
        np.testing.assert_array_equal(L, L.T)


class TestAdjacencyFromLaplacian:
    def test_inverse_single_edge(self):
        np.testing.assert_array_equal(
            adjacency_from_laplacian(np.array([[1.0, -1], [-1, 1]])), [[0, 1], [1, 0]]
        )

    def test_zero(self):
        np.testing.assert_array_equal(adjacency_from_laplacian(np.zeros((4, 4))), np.zeros((4, 4)))

    def test_positive_offdiag_clamps(self):
        L = np.array([[1.0, -1, 0], [-1, 1, 0.3], [0, 0.3, 0]])
        A = adjacency_from_laplacian(L)
        assert A[1, 2] == 0 and A[2, 1] == 0
        assert A[0, 1] == 1

    def test_asymmetry_beyond_tol_raises(self):
        L = np.array([[1.0, -1], [-0.5, 1]])
        with pytest.raises(GraphValidationError, match="asymmetry"):
            adjacency_from_laplacian(L, tol=1e-3)

    @given(adjacencies())
    def test_round_trip(self, A):
        np.testing.assert_array_equal(
            adjacency_from_laplacian(laplacian_from_adjacency(A), tol=1e-12), A
        )


def smoothness_double_sum(X, A):
    n = A.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            d = X[i] - X[j]
            total += A[i, j] * float(d @ d)
    return 0.5 * total


class TestSmoothness:
    def test_constant_columns_vanish(self):
        rng = np.random.default_rng(3)
        A = random_adjacency(rng, 6)
        X = np.tile([2.0, -1.0, 0.5], (6, 1))
        assert abs(smoothness(X, laplacian_from_adjacency(A))) < 1e-12

    def test_two_nodes(self):
        assert smoothness(np.array([[0.0], [1.0]]), np.array([[1.0, -1], [-1, 1]])) == 1.0

    def test_matches_double_sum(self):
        rng = np.random.default_rng(11)
        A = random_adjacency(rng, 6, weighted=True)
        X = rng.normal(size=(6, 3))
        assert smoothness(X, laplacian_from_adjacency(A)) == pytest.approx(
            smoothness_double_sum(X, A), abs=1e-10
        )

    def test_dimension_mismatch(self):
        with pytest.raises(GraphValidationError):
            smoothness(np.ones((3, 2)), np.zeros((4, 4)))

    @settings(max_examples=50)
    @given(adjacencies(), st.integers(0, 2**31))
    def test_nonnegative_and_additive(self, A, seed):
        L = laplacian_from_adjacency(A)
        assert validate_laplacian(L).valid
        X = np.random.default_rng(seed).normal(size=(len(A), 2))
        total = smoothness(X, L)
        assert total >= -1e-10
        parts = smoothness(X[:, :1], L) + smoothness(X[:, 1:], L)
        assert total == pytest.approx(parts, abs=1e-12 * max(1.0, abs(total)))


class TestValidateLaplacian:
    def test_triangle_valid(self):
        assert validate_laplacian(laplacian_from_adjacency(np.ones((3, 3)) - np.eye(3))).valid

    def test_identity_invalid(self):
        rep = validate_laplacian(np.eye(3))
        assert not rep.valid
        assert rep.max_row_sum == pytest.approx(1.0)

    def test_positive_offdiag_invalid(self):
        L = np.array([[1.0, -1], [-1, 1]])
        L[0, 1] += 0.5
        rep = validate_laplacian(L)
        assert not rep.valid
        assert rep.max_row_sum > 0 and rep.max_asymmetry > 0


class TestEdgeSet:
    def test_canonical_order_and_dedup(self):
        assert EdgeSet([(3, 1), (1, 3), (0, 2)]).sorted() == [(0, 2), (1, 3)]

    def test_self_loop_rejected(self):
        with pytest.raises(GraphValidationError):
            EdgeSet([(2, 2)])


class TestFeatureMatrix:
    def test_rejects_nonfinite(self):
        with pytest.raises(GraphValidationError, match=r"\(1, 0\)"):
            FeatureMatrix([[1.0], [np.nan]])

    def test_row_count_must_match(self):
        with pytest.raises(GraphValidationError):
            FeatureMatrix(np.ones((3, 2))).check_pairs_with(GraphData(np.zeros((4, 4))))


class TestInjectAnomalies:
    def test_k_zero_is_identity(self):
        g = GraphData.from_edges(4, [(0, 1), (2, 3)])
        g2, truth = inject_anomalies(g, g.non_edges(), 0, seed=1)
        assert g2 == g and truth == EdgeSet()

    def test_complete_graph_has_no_candidates(self):
        g = GraphData(np.ones((4, 4)) - np.eye(4))
        with pytest.raises(GraphValidationError):
            inject_anomalies(g, g.non_edges(), 1, seed=0)

    def test_candidate_must_be_non_edge(self):
        g = GraphData.from_edges(3, [(0, 1)])
        with pytest.raises(GraphValidationError, match="already an edge"):
            inject_anomalies(g, [(0, 1)], 1, seed=0)

    def test_sbm_injection_counts(self):
        cfg = SbmConfig(n_communities=2, n_nodes=20, p_in=0.7, p_out=0.1, n_features=2, seed=4)
        g, labels = generate_sbm(cfg)
        pool = cross_community_non_edges(g, labels)
        g2, truth = inject_anomalies(g, pool, 5, seed=9)
        assert g2.n_edges == g.n_edges + 5
        assert len(truth) == 5
        assert not (truth & g.edges())
        assert truth <= g2.edges()

    def test_same_seed_bit_identical(self):
        g = GraphData.from_edges(10, [(i, i + 1) for i in range(9)])
        a, ta = inject_anomalies(g, g.non_edges(), 6, seed=123)
        b, tb = inject_anomalies(g, g.non_edges(), 6, seed=123)
        assert a.adjacency.tobytes() == b.adjacency.tobytes()
        assert ta == tb


def test_community_labels_near_equal():
    labels = community_labels(10, 4)
    assert np.bincount(labels).tolist() == [3, 3, 2, 2]
