"""Directed network construction, meta-flow aggregation and leadingness.

The directed network keeps only the positive part of the skew-symmetric
score matrix, so an edge i -> j means series i leads series j with weight
S_ij.  Given a clustering, the meta-flow matrix averages the net pairwise
flow between clusters and the leadingness score ranks clusters by their
average net outflow to the whole panel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .metrics import LeadLagMatrix
from .seeding import derive_rng

if TYPE_CHECKING:  # pragma: no cover - annotation only
    from .clustering import Clustering


@dataclass(frozen=True)
class DirectedNetwork:
    """Nonnegative adjacency with at most one orientation per pair."""

    adjacency: np.ndarray
    series_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        adj = np.asarray(self.adjacency, dtype=float)
        ids = tuple(str(s) for s in self.series_ids)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be square")
        if adj.shape[0] != len(ids):
            raise ValueError("one series id per node required")
        if not np.all(np.isfinite(adj)):
            raise ValueError("adjacency must be finite")
        if adj.min(initial=0.0) < 0.0:
            raise ValueError("adjacency must be nonnegative")
        if np.diagonal(adj).any():
            raise ValueError("adjacency diagonal must be zero")
        if np.minimum(adj, adj.T).max(initial=0.0) != 0.0:
            raise ValueError("at most one orientation per pair may carry weight")
        adj = adj.copy()
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "series_ids", ids)

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]


@dataclass(frozen=True)
class MetaFlowGraph:
    """Skew-symmetric average net flow between clusters."""

    flow: np.ndarray
    cluster_sizes: np.ndarray

    def __post_init__(self) -> None:
        flow = np.asarray(self.flow, dtype=float)
        sizes = np.asarray(self.cluster_sizes, dtype=int)
        if flow.ndim != 2 or flow.shape[0] != flow.shape[1]:
            raise ValueError("flow must be square")
        if sizes.shape != (flow.shape[0],):
            raise ValueError("one size per cluster required")
        if (sizes <= 0).any():
            raise ValueError("cluster sizes must be positive")
        if np.abs(flow + flow.T).max(initial=0.0) > 1e-12:
            raise ValueError("flow must be skew-symmetric")
        object.__setattr__(self, "flow", flow)
        object.__setattr__(self, "cluster_sizes", sizes)

    @property
    def k(self) -> int:
        return self.flow.shape[0]


@dataclass(frozen=True)
class LeadingnessRanking:
    """Per-cluster average net outflow and the induced descending order.

    ``order[r]`` is the original cluster label holding rank ``r`` (rank 0 is
    the most leading cluster); ties are broken by the smaller original label.
    """

    cluster_scores: np.ndarray
    node_net_flow: np.ndarray
    order: np.ndarray

    def rank_of(self, cluster: int) -> int:
        return int(np.flatnonzero(self.order == cluster)[0])

    def relabel(self, labels: np.ndarray) -> np.ndarray:
        """Map raw labels to canonical ones (0 = most leading)."""
        rank = np.empty(len(self.order), dtype=int)
        rank[self.order] = np.arange(len(self.order))
        return rank[np.asarray(labels, dtype=int)]


def build_network(matrix: LeadLagMatrix) -> DirectedNetwork:
    """Keep the positive orientation of every scored pair."""
    return DirectedNetwork(np.maximum(matrix.scores, 0.0), matrix.series_ids)


def threshold_scores(matrix: LeadLagMatrix, quantile: float) -> LeadLagMatrix:
    """Zero out pairs whose |score| falls at or below the given quantile.

    Optional sparsification applied before :func:`build_network`; the
    quantile is taken over the upper-triangle magnitudes.
    """
    if not 0.0 <= quantile < 1.0:
        raise ValueError("quantile must lie in [0, 1)")
    scores = matrix.scores.copy()
    iu, ju = np.triu_indices(scores.shape[0], k=1)
    if iu.size:
        cut = np.quantile(np.abs(scores[iu, ju]), quantile)
        drop = np.abs(scores[iu, ju]) <= cut if quantile > 0.0 else np.zeros(iu.size, bool)
        scores[iu[drop], ju[drop]] = 0.0
        scores[ju[drop], iu[drop]] = 0.0
    return LeadLagMatrix(scores, matrix.series_ids)


def subsample_edges(matrix: LeadLagMatrix, probability: float, seed: int) -> LeadLagMatrix:
    """Keep each unordered pair independently with the given probability."""
    if not 0.0 <= probability <= 1.0:
        raise ValueError("probability must lie in [0, 1]")
    rng = derive_rng(seed, 0xED6E)
    scores = matrix.scores.copy()
    iu, ju = np.triu_indices(scores.shape[0], k=1)
    drop = rng.random(iu.size) >= probability
    scores[iu[drop], ju[drop]] = 0.0
    scores[ju[drop], iu[drop]] = 0.0
    return LeadLagMatrix(scores, matrix.series_ids)


def _net_flow(adjacency: np.ndarray) -> np.ndarray:
    return adjacency - adjacency.T


def _adjacency_of(network: DirectedNetwork | np.ndarray) -> np.ndarray:
    """Accept a DirectedNetwork or any nonnegative weight matrix.

    Meta-flow and leadingness are well defined for adjacencies that carry
    weight in both orientations of a pair, so they do not force the
    one-orientation invariant of DirectedNetwork.
    """
    if isinstance(network, DirectedNetwork):
        return network.adjacency
    adj = np.asarray(network, dtype=float)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ValueError("adjacency must be square")
    if not np.all(np.isfinite(adj)):
        raise ValueError("adjacency must be finite")
    if adj.min(initial=0.0) < 0.0:
        raise ValueError("adjacency must be nonnegative")
    if np.diagonal(adj).any():
        raise ValueError("adjacency diagonal must be zero")
    return adj


def meta_flow(network: DirectedNetwork | np.ndarray, clustering: "Clustering") -> MetaFlowGraph:
    """Average net flow ``F[i, j]`` between every pair of clusters.

    ``F[i, j] > 0`` means cluster i leads cluster j on average.  The matrix
    is exactly skew-symmetric with a zero diagonal.
    """
    adjacency = _adjacency_of(network)
    labels = np.asarray(clustering.labels)
    k = clustering.k
    if len(labels) != adjacency.shape[0]:
        raise ValueError("clustering and network disagree on the node count")
    sizes = np.bincount(labels, minlength=k)
    if (sizes == 0).any():
        empty = np.flatnonzero(sizes == 0).tolist()
        raise ValueError(f"empty clusters: {empty}")
    member = np.zeros((adjacency.shape[0], k))
    member[np.arange(adjacency.shape[0]), labels] = 1.0
    raw = member.T @ _net_flow(adjacency) @ member
    flow = raw / np.outer(sizes, sizes)
    flow = (flow - flow.T) / 2.0  # remove residual rounding asymmetry
    np.fill_diagonal(flow, 0.0)
    return MetaFlowGraph(flow, sizes)


def leadingness(network: DirectedNetwork | np.ndarray, clustering: "Clustering") -> LeadingnessRanking:
    """Average net outflow of each cluster's members over all panel nodes."""
    adjacency = _adjacency_of(network)
    labels = np.asarray(clustering.labels)
    k = clustering.k
    if len(labels) != adjacency.shape[0]:
        raise ValueError("clustering and network disagree on the node count")
    node_net = _net_flow(adjacency).sum(axis=1)
    sizes = np.bincount(labels, minlength=k)
    if (sizes == 0).any():
        empty = np.flatnonzero(sizes == 0).tolist()
        raise ValueError(f"empty clusters: {empty}")
    sums = np.bincount(labels, weights=node_net, minlength=k)
    scores = sums / sizes
    order = np.array(sorted(range(k), key=lambda c: (-scores[c], c)), dtype=int)
    return LeadingnessRanking(scores, node_net, order)


def relabel_by_leadingness(adjacency: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """Canonical labels: cluster 0 is the most leading.

    Works on raw arrays so clustering algorithms can canonicalize their
    output; empty clusters (possible for degenerate embeddings) sort last.
    """
    labels = np.asarray(labels, dtype=int)
    node_net = _net_flow(np.asarray(adjacency, dtype=float)).sum(axis=1)
    sizes = np.bincount(labels, minlength=k)
    sums = np.bincount(labels, weights=node_net, minlength=k)
    scores = np.where(sizes > 0, sums / np.maximum(sizes, 1), -np.inf)
    order = sorted(range(k), key=lambda c: (-scores[c], c))
    rank = np.empty(k, dtype=int)
    rank[np.asarray(order)] = np.arange(k)
    return rank[labels]


def meta_flow_json(
    flow_graph: MetaFlowGraph, ranking: LeadingnessRanking
) -> dict:
    """JSON-ready dict with cluster nodes and positive-flow edges."""
    nodes = [
        {
            "id": int(c),
            "size": int(flow_graph.cluster_sizes[c]),
            "leadingness": float(ranking.cluster_scores[c]),
        }
        for c in range(flow_graph.k)
    ]
    edges = []
    for i in range(flow_graph.k):
        for j in range(flow_graph.k):
            if flow_graph.flow[i, j] > 0.0:
                edges.append({"src": int(i), "dst": int(j), "flow": float(flow_graph.flow[i, j])})
    edges.sort(key=lambda e: (e["src"], e["dst"]))
    return {"nodes": nodes, "edges": edges}


def meta_flow_dot(flow_graph: MetaFlowGraph, ranking: LeadingnessRanking) -> str:
    """GraphViz DOT rendering of the positive meta-flow edges."""
    lines = ["digraph metaflow {"]
    for c in range(flow_graph.k):
        lines.append(
            f'  c{c} [label="cluster {c}\\nsize {int(flow_graph.cluster_sizes[c])}'
            f'\\nlead {ranking.cluster_scores[c]:.4f}"];'
        )
    for i in range(flow_graph.k):
        for j in range(flow_graph.k):
            if flow_graph.flow[i, j] > 0.0:
                lines.append(f'  c{i} -> c{j} [label="{flow_graph.flow[i, j]:.4f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
