import itertools

import numpy as np
import pytest

from leadlag.clustering import (
    ALGORITHMS,
    Clustering,
    SpectralConfig,
    bibliometric_symmetrization,
    cluster_bibliometric,
    cluster_disim,
    cluster_hermitian_rw,
    cluster_naive,
    clustering_json,
    disim_laplacian,
    hermitian_matrix,
    kmeans,
)
from leadlag.evaluation import adjusted_rand_index
from leadlag.network import DirectedNetwork, leadingness


def blobs(rng, n_per, centers, spread=0.05):
    points = np.vstack(
        [c + spread * rng.standard_normal((n_per, len(c))) for c in centers]
    )
    labels = np.repeat(np.arange(len(centers)), n_per)
    return points, labels


def senders_to_receivers(n_send=3, n_recv=3, weight=1.0):
    p = n_send + n_recv
    adj = np.zeros((p, p))
    adj[:n_send, n_send:] = weight
    return adj


def best_two_partition_by_cut_imbalance(adj):
    """Exhaustive search for the size-normalized most imbalanced split."""
    p = adj.shape[0]
    best, best_val = None, -1.0
    for mask_bits in range(1, 2 ** (p - 1)):
        mask = np.array([(mask_bits >> i) & 1 for i in range(p)], dtype=bool)
        a = np.flatnonzero(mask)
        b = np.flatnonzero(~mask)
        cut_ab = adj[np.ix_(a, b)].sum()
        cut_ba = adj[np.ix_(b, a)].sum()
        val = abs(cut_ab - cut_ba) / (len(a) * len(b))
        if val > best_val:
            best_val = val
            best = mask.astype(int)
    return best


class TestClusteringType:
    def test_label_range_enforced(self):
        with pytest.raises(ValueError, match="labels must lie"):
            Clustering(np.array([0, 2]), 2)

    def test_k_cannot_exceed_n(self):
        with pytest.raises(ValueError, match="cannot exceed"):
            Clustering(np.array([0]), 2)

    def test_sizes(self):
        c = Clustering(np.array([0, 1, 1, 2]), 3)
        np.testing.assert_array_equal(c.sizes(), [1, 2, 1])

    def test_json_payload(self):
        c = Clustering(np.array([1, 0]), 2)
        payload = clustering_json(c, ("a", "b"), "naive", seed=7)
        assert payload["labels"] == {"a": 1, "b": 0}
        assert payload["algorithm"] == "naive" and payload["k"] == 2


class TestSpectralConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SpectralConfig(k=0)
        with pytest.raises(ValueError):
            SpectralConfig(k=2, eig_tolerance=0.0)
        with pytest.raises(ValueError):
            SpectralConfig(k=2, n_eigenvectors=0)

    def test_embed_dim_defaults_to_k(self):
        assert SpectralConfig(k=4).embed_dim == 4
        assert SpectralConfig(k=4, n_eigenvectors=7).embed_dim == 7


class TestKmeans:
    def test_two_blobs_recovered(self):
        rng = np.random.default_rng(0)
        points, truth = blobs(rng, 20, [(0.0, 0.0), (10.0, 10.0)])
        got = kmeans(points, 2, SpectralConfig(k=2, seed=1))
        assert adjusted_rand_index(got.labels, truth) == 1.0

    def test_single_cluster(self):
        points = np.random.default_rng(1).standard_normal((5, 2))
        got = kmeans(points, 1, SpectralConfig(k=1))
        np.testing.assert_array_equal(got.labels, np.zeros(5, dtype=int))

    def test_uniform_scaling_leaves_labels_unchanged(self):
        rng = np.random.default_rng(2)
        points, _ = blobs(rng, 15, [(0.0, 0.0), (4.0, 0.0), (0.0, 4.0)])
        config = SpectralConfig(k=3, seed=3)
        base = kmeans(points, 3, config)
        scaled = kmeans(2.0 * points, 3, config)
        np.testing.assert_array_equal(base.labels, scaled.labels)

    def test_k_larger_than_n(self):
        with pytest.raises(ValueError, match="exceeds"):
            kmeans(np.zeros((2, 2)), 3, SpectralConfig(k=3))

    def test_all_labels_used(self):
        rng = np.random.default_rng(4)
        points, _ = blobs(rng, 10, [(0, 0), (5, 0), (0, 5), (5, 5)])
        got = kmeans(points, 4, SpectralConfig(k=4, seed=5))
        assert set(got.labels.tolist()) == {0, 1, 2, 3}


class TestNaive:
    def test_disconnected_cliques_recovered(self):
        adj = np.zeros((8, 8))
        for block in (range(4), range(4, 8)):
            for i, j in itertools.combinations(block, 2):
                adj[i, j] = 1.0  # one orientation; symmetrization restores the clique
        got = cluster_naive(adj, SpectralConfig(k=2, seed=0))
        truth = np.array([0] * 4 + [1] * 4)
        assert adjusted_rand_index(got.labels, truth) == 1.0

    def test_direction_blind_on_uniform_density(self):
        # every pair connected; orientation carries all the structure
        rng = np.random.default_rng(5)
        p = 20
        truth = np.array([0] * (p // 2) + [1] * (p // 2))
        adj = np.zeros((p, p))
        for i, j in itertools.combinations(range(p), 2):
            if truth[i] == truth[j]:
                if rng.random() < 0.5:
                    adj[i, j] = 1.0
                else:
                    adj[j, i] = 1.0
            elif truth[i] == 0:
                adj[i, j] = 1.0
            else:
                adj[j, i] = 1.0
        naive = cluster_naive(adj, SpectralConfig(k=2, seed=6))
        herm = cluster_hermitian_rw(adj, SpectralConfig(k=2, seed=6))
        assert abs(adjusted_rand_index(naive.labels, truth)) < 0.2
        assert adjusted_rand_index(herm.labels, truth) == 1.0

    def test_single_cluster(self):
        adj = np.zeros((3, 3))
        adj[0, 1] = 1.0
        got = cluster_naive(adj, SpectralConfig(k=1, seed=0))
        np.testing.assert_array_equal(got.labels, [0, 0, 0])

    def test_k_exceeds_nodes(self):
        with pytest.raises(ValueError, match="exceed"):
            cluster_naive(np.zeros((2, 2)), SpectralConfig(k=3))


class TestBibliometric:
    def test_symmetrization_is_symmetric(self):
        rng = np.random.default_rng(7)
        upper = np.triu(rng.random((10, 10)), k=1)
        adj = np.where(rng.random((10, 10)) < 0.5, upper, 0.0)
        sym = bibliometric_symmetrization(adj)
        assert np.abs(sym - sym.T).max() < 1e-12

    def test_shared_neighbor_groups_co_assigned(self):
        # 0,1 send to 4,5; 2,3 send to 6,7: four co-assignment groups
        adj = np.zeros((8, 8))
        adj[0, 4] = adj[0, 5] = adj[1, 4] = adj[1, 5] = 1.0
        adj[2, 6] = adj[2, 7] = adj[3, 6] = adj[3, 7] = 1.0
        got = cluster_bibliometric(adj, SpectralConfig(k=4, seed=8))
        labels = got.labels
        assert labels[0] == labels[1]
        assert labels[2] == labels[3]
        assert labels[4] == labels[5]
        assert labels[6] == labels[7]
        assert labels[0] != labels[4] and labels[2] != labels[6]

    def test_zero_degree_node_clustered(self):
        adj = np.zeros((5, 5))
        adj[0, 1] = adj[2, 3] = 1.0  # node 4 fully isolated
        got = cluster_bibliometric(adj, SpectralConfig(k=3, seed=9))
        assert got.labels.shape == (5,)
        assert set(got.labels.tolist()) <= {0, 1, 2}


class TestDisim:
    def test_left_separates_senders_from_receivers(self):
        adj = senders_to_receivers()
        truth = np.array([0, 0, 0, 1, 1, 1])
        for side in ("left", "right"):
            got = cluster_disim(adj, SpectralConfig(k=2, seed=10), side=side)
            assert adjusted_rand_index(got.labels, truth) == 1.0

    def test_singular_values_sorted_nonnegative(self):
        rng = np.random.default_rng(11)
        adj = np.maximum(np.triu(rng.standard_normal((9, 9)), k=1), 0.0)
        lap = disim_laplacian(adj)
        svals = np.linalg.svd(lap, compute_uv=False)
        assert (svals >= 0.0).all()
        assert (np.diff(svals) <= 1e-12).all()

    def test_zero_tau_reduces_to_unregularized_laplacian(self):
        # directed circulant: every node sends weight 1 to the next two
        p = 6
        adj = np.zeros((p, p))
        for i in range(p):
            adj[i, (i + 1) % p] = 1.0
            adj[i, (i + 2) % p] = 1.0
        d_out = adj.sum(axis=1)
        d_in = adj.sum(axis=0)
        expected = adj / np.sqrt(np.outer(d_out, d_in))
        np.testing.assert_allclose(disim_laplacian(adj, tau=0.0), expected, atol=1e-12)

    def test_default_tau_is_mean_row_sum(self):
        adj = senders_to_receivers(weight=2.0)
        tau = adj.sum(axis=1).mean()
        np.testing.assert_allclose(
            disim_laplacian(adj), disim_laplacian(adj, tau=tau), atol=0.0
        )

    def test_side_validated(self):
        with pytest.raises(ValueError, match="side"):
            cluster_disim(senders_to_receivers(), SpectralConfig(k=2), side="up")


class TestHermitian:
    def test_hermitian_matrix_definition(self):
        adj = np.array([[0.0, 2.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
        mat = hermitian_matrix(adj)
        assert mat[0, 1] == 2.0j and mat[1, 0] == -2.0j
        assert np.abs(mat - mat.conj().T).max() == 0.0

    def test_spectrum_real_and_paired(self):
        rng = np.random.default_rng(12)
        upper = np.triu(rng.random((12, 12)), k=1)
        adj = np.where(rng.random((12, 12)) < 0.5, upper, 0.0)
        eigvals = np.linalg.eig(hermitian_matrix(adj)).eigenvalues
        assert np.abs(eigvals.imag).max() < 1e-10
        lam = np.sort(eigvals.real)
        np.testing.assert_allclose(lam + lam[::-1], 0.0, atol=1e-8)

    def test_two_block_flow_recovered(self):
        adj = senders_to_receivers()
        got = cluster_hermitian_rw(adj, SpectralConfig(k=2, seed=13))
        truth = np.array([0, 0, 0, 1, 1, 1])
        assert adjusted_rand_index(got.labels, truth) == 1.0
        # canonical label 0 is the sending cluster
        np.testing.assert_array_equal(got.labels, truth)

    def test_agrees_with_cut_imbalance_oracle(self):
        rng = np.random.default_rng(14)
        adj = senders_to_receivers()
        adj[0, 3] = 2.0  # perturb weights, keep the optimal split intact
        oracle = best_two_partition_by_cut_imbalance(adj)
        got = cluster_hermitian_rw(adj, SpectralConfig(k=2, seed=14))
        assert adjusted_rand_index(got.labels, oracle) == 1.0

    def test_no_directed_structure_error(self):
        with pytest.raises(ValueError, match="no directed structure detected"):
            cluster_hermitian_rw(np.zeros((4, 4)), SpectralConfig(k=2, seed=0))

    def test_requires_k_at_least_two(self):
        with pytest.raises(ValueError, match="k >= 2"):
            cluster_hermitian_rw(senders_to_receivers(), SpectralConfig(k=1))


def flow_chain_graph(p=12):
    """Directed flow through 3 groups; strong signal for flow-aware methods."""
    adj = np.zeros((p, p))
    third = p // 3
    groups = [range(third), range(third, 2 * third), range(2 * third, p)]
    for g, nxt in ((0, 1), (1, 2)):
        for i in groups[g]:
            for j in groups[nxt]:
                adj[i, j] = 1.0
    return adj, np.repeat([0, 1, 2], third)


def assortative_flow_graph():
    """Dense within-group ties plus a weak directed flow between groups."""
    adj = np.zeros((12, 12))
    groups = [range(0, 4), range(4, 8), range(8, 12)]
    for g in groups:
        for i, j in itertools.combinations(g, 2):
            adj[i, j] = 3.0
    for g, nxt in ((0, 1), (1, 2)):
        for i in groups[g]:
            for j in groups[nxt]:
                adj[i, j] = 1.0
    return adj, np.repeat([0, 1, 2], 4)


def shared_children_graph():
    # 0,1 send to 4,5; 2,3 send to 6,7: four co-assignment groups
    adj = np.zeros((8, 8))
    adj[0, 4] = adj[0, 5] = adj[1, 4] = adj[1, 5] = 1.0
    adj[2, 6] = adj[2, 7] = adj[3, 6] = adj[3, 7] = 1.0
    return adj, np.array([0, 0, 1, 1, 2, 2, 3, 3])


def crisp_case(name):
    """A graph each algorithm separates unambiguously, with k and truth.

    k-means ties are broken by row order, so exact permutation
    equivariance is only promised where the embedding is crisp.
    """
    if name == "naive":
        adj, truth = assortative_flow_graph()
    elif name == "bibliometric":
        adj, truth = shared_children_graph()
    elif name in ("disim-left", "disim-right"):
        adj, truth = senders_to_receivers(), np.array([0, 0, 0, 1, 1, 1])
    else:
        adj, truth = flow_chain_graph()
    return adj, len(set(truth.tolist())), truth


class TestSharedContracts:
    @pytest.mark.parametrize("name", sorted(ALGORITHMS))
    def test_determinism(self, name):
        adj, _ = flow_chain_graph()
        config = SpectralConfig(k=3, seed=15)
        a = ALGORITHMS[name](adj, config)
        b = ALGORITHMS[name](adj, config)
        np.testing.assert_array_equal(a.labels, b.labels)

    @pytest.mark.parametrize("name", sorted(ALGORITHMS))
    def test_recovers_planted_groups(self, name):
        adj, k, truth = crisp_case(name)
        got = ALGORITHMS[name](adj, SpectralConfig(k=k, seed=15))
        assert adjusted_rand_index(got.labels, truth) == 1.0

    @pytest.mark.parametrize("name", sorted(ALGORITHMS))
    def test_permutation_equivariance(self, name):
        adj, k, _ = crisp_case(name)
        rng = np.random.default_rng(16)
        perm = rng.permutation(adj.shape[0])
        config = SpectralConfig(k=k, seed=17)
        base = ALGORITHMS[name](adj, config).labels
        permuted = ALGORITHMS[name](adj[np.ix_(perm, perm)], config).labels
        assert adjusted_rand_index(permuted, base[perm]) == 1.0

    @pytest.mark.parametrize("name", sorted(ALGORITHMS))
    def test_all_labels_used(self, name):
        adj, _ = flow_chain_graph()
        got = ALGORITHMS[name](adj, SpectralConfig(k=3, seed=18))
        assert set(got.labels.tolist()) == {0, 1, 2}

    def test_accepts_directed_network_wrapper(self):
        adj, truth = flow_chain_graph()
        net = DirectedNetwork(adj, tuple(f"n{i}" for i in range(adj.shape[0])))
        got = cluster_hermitian_rw(net, SpectralConfig(k=3, seed=19))
        assert adjusted_rand_index(got.labels, truth) == 1.0

    def test_canonical_labels_descend_in_leadingness(self):
        adj, _ = flow_chain_graph()
        got = cluster_hermitian_rw(adj, SpectralConfig(k=3, seed=20))
        ranking = leadingness(adj, got)
        assert (np.diff(ranking.cluster_scores) <= 1e-12).all()
        np.testing.assert_array_equal(ranking.order, [0, 1, 2])


class TestComponentSplitting:
    def two_chains(self):
        # disconnected directed chains of 6 and 3 nodes
        adj = np.zeros((9, 9))
        for i in range(5):
            adj[i, i + 1] = 1.0
        adj[6, 7] = adj[7, 8] = 1.0
        return adj

    def test_proportional_allocation(self):
        got = cluster_naive(self.two_chains(), SpectralConfig(k=3, seed=21))
        big = set(got.labels[:6].tolist())
        small = set(got.labels[6:].tolist())
        assert len(big) == 2 and len(small) == 1
        assert big.isdisjoint(small)

    def test_components_recovered_exactly_at_matching_k(self):
        got = cluster_naive(self.two_chains(), SpectralConfig(k=2, seed=22))
        truth = np.array([0] * 6 + [1] * 3)
        assert adjusted_rand_index(got.labels, truth) == 1.0
