"""Spectral clustering of directed lead-lag networks.

Four algorithms share a common k-means back end.  Naive symmetrization and
degree-discounted bibliometric symmetrization reduce the directed graph to
an undirected one and run classical spectral clustering.  DI-SIM clusters
the left or right singular vectors of a regularized asymmetric Laplacian.
The Hermitian random-walk method embeds nodes with the top eigenvectors of
the normalized Hermitian matrix i(A - A^T), which targets directional flow
imbalance between clusters rather than edge density.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from sklearn.cluster import KMeans

from .network import DirectedNetwork, _adjacency_of, relabel_by_leadingness
from .seeding import derive_seed

# Degrees are floored before inversion so isolated nodes get near-zero
# embeddings instead of NaNs.
DEGREE_FLOOR = 1e-8

_KMEANS_TAG = 0x6B6D


@dataclass(frozen=True)
class SpectralConfig:
    """Shared knobs for the spectral algorithms.

    ``n_eigenvectors`` defaults to ``k`` when left unset.  ``eig_tolerance``
    is the magnitude below which Hermitian eigenvalues are treated as noise.
    """

    k: int
    n_eigenvectors: int | None = None
    eig_tolerance: float = 1e-8
    kmeans_restarts: int = 10
    kmeans_max_iters: int = 300
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.n_eigenvectors is not None and self.n_eigenvectors < 1:
            raise ValueError("n_eigenvectors must be >= 1")
        if self.eig_tolerance <= 0.0:
            raise ValueError("eig_tolerance must be positive")
        if self.kmeans_restarts < 1:
            raise ValueError("kmeans_restarts must be >= 1")
        if self.kmeans_max_iters < 1:
            raise ValueError("kmeans_max_iters must be >= 1")

    @property
    def embed_dim(self) -> int:
        return self.k if self.n_eigenvectors is None else self.n_eigenvectors


@dataclass(frozen=True)
class Clustering:
    """A hard partition of p nodes into clusters labeled 0..k-1."""

    labels: np.ndarray
    k: int

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=int).copy()
        if labels.ndim != 1:
            raise ValueError("labels must be a vector")
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.k > labels.size:
            raise ValueError("k cannot exceed the number of nodes")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ValueError("labels must lie in {0..k-1}")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n_nodes(self) -> int:
        return self.labels.size

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)


def clustering_json(
    clustering: Clustering,
    series_ids: tuple[str, ...],
    algorithm: str,
    seed: int,
    leadingness_scores: np.ndarray | None = None,
) -> dict:
    """JSON-ready mapping of series ids to labels plus run metadata."""
    if len(series_ids) != clustering.n_nodes:
        raise ValueError("one series id per node required")
    payload = {
        "algorithm": algorithm,
        "k": clustering.k,
        "seed": seed,
        "labels": {str(s): int(l) for s, l in zip(series_ids, clustering.labels)},
    }
    if leadingness_scores is not None:
        payload["leadingness"] = [float(x) for x in leadingness_scores]
    return payload


def kmeans(points: np.ndarray, k: int, config: SpectralConfig) -> Clustering:
    """Best-of-restarts k-means with k-means++ seeding, deterministic by seed."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = points.shape[0]
    if k > n:
        raise ValueError("k exceeds the number of points")
    if k == 1:
        return Clustering(np.zeros(n, dtype=int), 1)
    model = KMeans(
        n_clusters=k,
        init="k-means++",
        n_init=config.kmeans_restarts,
        max_iter=config.kmeans_max_iters,
        random_state=derive_seed(config.seed, _KMEANS_TAG),
    )
    labels = model.fit_predict(points)
    return Clustering(labels, k)


def _rw_spectral_embed(weights: np.ndarray, n_components: int) -> np.ndarray:
    """Eigenvectors 2..n_components+1 of the random-walk Laplacian.

    Solved through the symmetric normalization: if u solves
    L_sym u = mu u then D^{-1/2} u solves L_rw v = mu v.
    """
    degrees = np.maximum(weights.sum(axis=1), DEGREE_FLOOR)
    inv_sqrt = 1.0 / np.sqrt(degrees)
    norm = inv_sqrt[:, None] * weights * inv_sqrt[None, :]
    norm = (norm + norm.T) / 2.0
    _, eigvecs = np.linalg.eigh(np.eye(weights.shape[0]) - norm)
    picked = eigvecs[:, 1 : n_components + 1]
    return inv_sqrt[:, None] * picked


def bibliometric_symmetrization(adjacency: np.ndarray) -> np.ndarray:
    """Degree-discounted symmetrization coupling co-senders and co-receivers.

    Returns D_o^{-1/2} A D_i^{-1/2} A^T D_o^{-1/2}
          + D_i^{-1/2} A^T D_o^{-1/2} A D_i^{-1/2}.
    """
    adjacency = np.asarray(adjacency, dtype=float)
    out_scale = 1.0 / np.sqrt(np.maximum(adjacency.sum(axis=1), DEGREE_FLOOR))
    in_scale = 1.0 / np.sqrt(np.maximum(adjacency.sum(axis=0), DEGREE_FLOOR))
    left = out_scale[:, None] * adjacency * in_scale[None, :]
    coupling = left @ (adjacency.T * out_scale[None, :])
    co_citation = left.T @ (adjacency * in_scale[None, :])
    return coupling + co_citation


def disim_laplacian(adjacency: np.ndarray, tau: float | None = None) -> np.ndarray:
    """Regularized asymmetric Laplacian (D_o+tau I)^{-1/2} A (D_i+tau I)^{-1/2}.

    ``tau`` defaults to the average row sum of the adjacency.
    """
    adjacency = np.asarray(adjacency, dtype=float)
    if tau is None:
        tau = float(adjacency.sum(axis=1).mean())
    if tau < 0.0:
        raise ValueError("tau must be nonnegative")
    out_scale = 1.0 / np.sqrt(np.maximum(adjacency.sum(axis=1) + tau, DEGREE_FLOOR))
    in_scale = 1.0 / np.sqrt(np.maximum(adjacency.sum(axis=0) + tau, DEGREE_FLOOR))
    return out_scale[:, None] * adjacency * in_scale[None, :]


def hermitian_matrix(adjacency: np.ndarray) -> np.ndarray:
    """Hermitian encoding i(A - A^T) of the directed graph."""
    adjacency = np.asarray(adjacency, dtype=float)
    return 1j * (adjacency - adjacency.T)


def _embed_symmetric(weights: np.ndarray, config: SpectralConfig) -> np.ndarray:
    return _rw_spectral_embed(weights, config.embed_dim)


def _disim_embedding(adjacency: np.ndarray, config: SpectralConfig, side: str) -> np.ndarray:
    lap = disim_laplacian(adjacency)
    left_vecs, singular, right_vecs_t = np.linalg.svd(lap, full_matrices=False)
    # null singular directions are an arbitrary basis choice; keeping them
    # would hand k-means meaningless coordinates
    informative = max(1, int(np.count_nonzero(singular > config.eig_tolerance)))
    take = min(config.embed_dim, informative)
    emb = left_vecs[:, :take] if side == "left" else right_vecs_t[:take].T
    # rows of rounding noise must stay zero: normalizing them would blow
    # 1e-17 residue up to unit length
    norms = np.linalg.norm(emb, axis=1)
    keep = norms > config.eig_tolerance
    return np.where(keep[:, None], emb, 0.0) / np.where(keep, norms, 1.0)[:, None]


def _embed_hermitian(adjacency: np.ndarray, config: SpectralConfig) -> np.ndarray:
    herm = hermitian_matrix(adjacency)
    degrees = np.abs(adjacency - adjacency.T).sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(np.maximum(degrees, DEGREE_FLOOR))
    norm = inv_sqrt[:, None] * herm * inv_sqrt[None, :]
    eigvals, eigvecs = np.linalg.eigh(norm)
    order = np.argsort(-np.abs(eigvals), kind="stable")
    magnitudes = np.abs(eigvals[order])
    informative = int(np.count_nonzero(magnitudes > config.eig_tolerance))
    if informative == 0:
        raise ValueError("no directed structure detected")
    picked = eigvecs[:, order[: min(config.embed_dim, informative)]]
    return np.concatenate([picked.real, picked.imag], axis=1)


def _components(matrix: np.ndarray) -> tuple[int, np.ndarray]:
    graph = csr_matrix(matrix != 0.0)
    return connected_components(graph, directed=True, connection="weak")


def _allocate_clusters(sizes: np.ndarray, k: int) -> np.ndarray:
    """Split k clusters across components, at least one each, capped at size."""
    alloc = np.ones(sizes.size, dtype=int)
    target = sizes * (k / sizes.sum())
    for _ in range(k - sizes.size):
        gain = target - alloc
        gain[alloc >= sizes] = -np.inf
        alloc[int(np.argmax(gain))] += 1
    return alloc


_Embedder = Callable[[np.ndarray, SpectralConfig], np.ndarray]
_Transform = Callable[[np.ndarray], np.ndarray]


def _cluster_block(embed: _Embedder, matrix: np.ndarray, config: SpectralConfig) -> np.ndarray:
    if config.k == 1:
        return np.zeros(matrix.shape[0], dtype=int)
    points = embed(matrix, config)
    return np.asarray(kmeans(points, config.k, config).labels)


def _cluster_with(
    transform: _Transform,
    embed: _Embedder,
    network: DirectedNetwork | np.ndarray,
    config: SpectralConfig,
) -> Clustering:
    """Split on components of the spectral input, then embed + k-means.

    ``transform`` maps the adjacency to the matrix the embedding consumes.
    Components are detected on that matrix, not the raw adjacency: the
    bibliometric symmetrization can disconnect a weakly connected graph,
    and eigenvectors within a disconnected graph's degenerate eigenspaces
    are an arbitrary basis choice.
    """
    adjacency = _adjacency_of(network)
    p = adjacency.shape[0]
    if config.k > p:
        raise ValueError("k exceeds the number of nodes")
    base = transform(adjacency)
    n_comp, comp = _components(base)
    if 1 < n_comp <= config.k:
        sizes = np.bincount(comp, minlength=n_comp)
        alloc = _allocate_clusters(sizes, config.k)
        labels = np.empty(p, dtype=int)
        offset = 0
        for c in range(n_comp):
            nodes = np.flatnonzero(comp == c)
            sub = base[np.ix_(nodes, nodes)]
            labels[nodes] = offset + _cluster_block(embed, sub, replace(config, k=int(alloc[c])))
            offset += int(alloc[c])
    else:
        labels = _cluster_block(embed, base, config)
    return Clustering(relabel_by_leadingness(adjacency, labels, config.k), config.k)


def cluster_naive(network: DirectedNetwork | np.ndarray, config: SpectralConfig) -> Clustering:
    """Spectral clustering of the plain symmetrization A + A^T.

    Direction-blind: it sees only the undirected co-activity structure.
    """
    return _cluster_with(lambda a: a + a.T, _embed_symmetric, network, config)


def cluster_bibliometric(network: DirectedNetwork | np.ndarray, config: SpectralConfig) -> Clustering:
    """Spectral clustering of the degree-discounted bibliometric matrix.

    Nodes sharing senders or receivers are coupled even when they never
    link to each other; conversely the symmetrized graph can fall apart
    into more components than the raw adjacency, and those components are
    clustered independently whenever they fit within ``config.k``.
    """
    return _cluster_with(bibliometric_symmetrization, _embed_symmetric, network, config)


def cluster_disim(
    network: DirectedNetwork | np.ndarray,
    config: SpectralConfig,
    side: str = "left",
) -> Clustering:
    """Co-clustering on singular vectors of the regularized Laplacian.

    ``side='left'`` groups nodes by sending pattern, ``'right'`` by
    receiving pattern.  Rows of the chosen singular-vector matrix are
    normalized to unit length before k-means; rows with norm below the
    eigenvalue tolerance stay zero.
    """
    side_key = str(side).lower()
    if side_key not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")

    def embed(adjacency: np.ndarray, cfg: SpectralConfig) -> np.ndarray:
        return _disim_embedding(adjacency, cfg, side_key)

    return _cluster_with(lambda a: a, embed, network, config)


def cluster_hermitian_rw(network: DirectedNetwork | np.ndarray, config: SpectralConfig) -> Clustering:
    """Cluster the embedding from top eigenvectors of normalized i(A - A^T).

    Nodes are embedded with the real and imaginary parts of their
    coordinates in the l = min(n_eigenvectors, #{|lambda| > eps}) leading
    eigenvectors.  Raises when every eigenvalue magnitude is below the
    tolerance, i.e. the graph carries no directional signal.
    """
    if config.k < 2:
        raise ValueError("hermitian clustering needs k >= 2")
    return _cluster_with(lambda a: a, _embed_hermitian, network, config)


ALGORITHMS: dict[str, Callable[[DirectedNetwork | np.ndarray, SpectralConfig], Clustering]] = {
    "naive": cluster_naive,
    "bibliometric": cluster_bibliometric,
    "disim-left": lambda network, config: cluster_disim(network, config, side="left"),
    "disim-right": lambda network, config: cluster_disim(network, config, side="right"),
    "hermitian-rw": cluster_hermitian_rw,
}
