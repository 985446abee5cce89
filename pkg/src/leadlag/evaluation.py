"""Scoring for lead-lag detection, clustering quality and significance.

Edge accuracy grades the sign of the score matrix against the ground-truth
lead direction; clustering quality uses the adjusted Rand index and Jaccard
overlaps.  The permutation test destroys temporal structure by shuffling
panel rows and compares the largest Hermitian eigenvalue magnitude of the
resulting network against the observed one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy import stats
from sklearn.metrics import adjusted_rand_score

from .clustering import ALGORITHMS, SpectralConfig
from .metrics import LeadLagMatrix, LeadLagMetricSpec, leadlag_matrix, prepare_panel
from .network import build_network
from .panel import PanelKind, TimeSeriesPanel
from .seeding import derive_rng, derive_seed
from .synthetic import DEFAULT_P, DEFAULT_T, GroundTruth, Setting, default_spec, generate

_PERMUTE_TAG = 0x9E27


def edge_accuracy(matrix: LeadLagMatrix, truth: GroundTruth) -> float:
    """Fraction of truth-directed pairs whose sign is recovered.

    Pairs scored exactly 0 earn half credit, the asymptote of a detector
    that flips a coin on every undecided pair.
    """
    scores = matrix.scores
    direction = truth.edge_direction
    if scores.shape != direction.shape:
        raise ValueError("score matrix and truth have different shapes")
    iu, ju = np.triu_indices(scores.shape[0], k=1)
    directed = direction[iu, ju] != 0
    if not directed.any():
        raise ValueError("ground truth contains no directed pairs")
    got = np.sign(scores[iu, ju][directed])
    want = direction[iu, ju][directed]
    credit = np.where(got == 0, 0.5, (got == want).astype(float))
    return float(credit.mean())


def _label_vector(clustering) -> np.ndarray:
    labels = getattr(clustering, "labels", clustering)
    return np.asarray(labels, dtype=int)


def adjusted_rand_index(a, b) -> float:
    """Contingency-table ARI; 1 on identical partitions up to relabeling."""
    la, lb = _label_vector(a), _label_vector(b)
    if la.size != lb.size:
        raise ValueError("label vectors must have equal length")
    return float(adjusted_rand_score(la, lb))


def jaccard_matrix(a, b) -> np.ndarray:
    """Pairwise |A_i n B_j| / |A_i u B_j| between the clusters of a and b."""
    la, lb = _label_vector(a), _label_vector(b)
    if la.size != lb.size:
        raise ValueError("label vectors must have equal length")
    if la.size == 0:
        raise ValueError("empty clustering")
    ka, kb = la.max() + 1, lb.max() + 1
    joint = np.zeros((ka, kb))
    np.add.at(joint, (la, lb), 1.0)
    sizes_a = joint.sum(axis=1, keepdims=True)
    sizes_b = joint.sum(axis=0, keepdims=True)
    union = sizes_a + sizes_b - joint
    return joint / union


@dataclass(frozen=True)
class PermutationTestResult:
    observed_statistic: float
    null_samples: np.ndarray
    p_value: float
    n_monte_carlo: int

    def __post_init__(self) -> None:
        nulls = np.asarray(self.null_samples, dtype=float).copy()
        if nulls.size != self.n_monte_carlo:
            raise ValueError("one null sample per replicate required")
        nulls.setflags(write=False)
        object.__setattr__(self, "null_samples", nulls)


def largest_hermitian_eigenvalue(scores: np.ndarray) -> float:
    """Largest |eigenvalue| of the Hermitian network matrix i(A - A^T).

    With A = max(S, 0) built from a skew score matrix S one has
    A - A^T = S, so i(A - A^T) = iS and the largest eigenvalue magnitude
    is the top singular value of S.
    """
    return float(np.linalg.svd(np.asarray(scores, dtype=float), compute_uv=False)[0])


def permutation_test_largest_eigenvalue(
    panel: TimeSeriesPanel,
    spec: LeadLagMetricSpec,
    n_mc: int = 200,
    seed: int = 0,
) -> PermutationTestResult:
    """Row-permutation null for the largest Hermitian network eigenvalue.

    Each replicate shuffles the time ordering of the whole panel, reruns
    the metric pipeline and records the statistic.  The add-one rank
    p-value counts ties and can never reach 0.
    """
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    if panel.kind is not PanelKind.DIFFERENCES:
        raise ValueError("permutation test shuffles return rows; pass a differences panel")
    observed = largest_hermitian_eigenvalue(
        leadlag_matrix(prepare_panel(panel, spec), spec).scores
    )
    nulls = np.empty(n_mc)
    for rep in range(n_mc):
        rng = derive_rng(seed, _PERMUTE_TAG, rep)
        order = rng.permutation(panel.n_rows)
        shuffled = TimeSeriesPanel(
            panel.timestamps, panel.series_ids, panel.values[order], panel.kind
        )
        try:
            nulls[rep] = largest_hermitian_eigenvalue(
                leadlag_matrix(prepare_panel(shuffled, spec), spec).scores
            )
        except Exception as exc:
            raise RuntimeError(f"permutation replicate {rep} failed: {exc}") from exc
    p_value = (1.0 + float(np.count_nonzero(nulls >= observed))) / (n_mc + 1.0)
    return PermutationTestResult(observed, nulls, p_value, n_mc)


def spearman_attribute_correlation(rowsums: np.ndarray, attribute: np.ndarray) -> float:
    """Average-rank Spearman correlation; 0 when either input is constant."""
    rowsums = np.asarray(rowsums, dtype=float)
    attribute = np.asarray(attribute, dtype=float)
    if rowsums.shape != attribute.shape or rowsums.ndim != 1:
        raise ValueError("inputs must be equal-length vectors")
    if rowsums.size < 3:
        raise ValueError("need at least 3 observations")
    if np.ptp(rowsums) == 0.0 or np.ptp(attribute) == 0.0:
        return 0.0
    return float(stats.spearmanr(rowsums, attribute).statistic)


def gaussian_ci(samples: np.ndarray) -> tuple[float, float]:
    """Mean and 95% half-width 1.96*sd/sqrt(n) over repetitions."""
    samples = np.asarray(samples, dtype=float)
    mean = float(samples.mean())
    if samples.size < 2:
        return mean, float("nan")
    half = 1.96 * float(samples.std(ddof=1)) / np.sqrt(samples.size)
    return mean, half


@dataclass(frozen=True)
class EvaluationReport:
    """Monte Carlo summary of one benchmark cell.

    ``edge_accuracy``/``ari`` hold means over repetitions; the ``*_reps``
    fields keep the per-repetition samples for confidence intervals.
    """

    edge_accuracy: float
    ari: dict[str, float]
    edge_accuracy_reps: np.ndarray
    ari_reps: dict[str, np.ndarray]

    @property
    def n_reps(self) -> int:
        return self.edge_accuracy_reps.size


def benchmark_runs(
    setting: Setting | str,
    sigma: float,
    metric_spec: LeadLagMetricSpec,
    n_reps: int,
    seed: int,
    T: int = DEFAULT_T,
    p: int = DEFAULT_P,
) -> Iterator[tuple[int, LeadLagMatrix, GroundTruth]]:
    """Yield (rep, score matrix, truth) for independent panel draws."""
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    for rep in range(n_reps):
        spec = default_spec(setting, sigma, T=T, p=p, seed=derive_seed(seed, rep))
        panel, truth = generate(spec)
        matrix = leadlag_matrix(prepare_panel(panel, metric_spec), metric_spec)
        yield rep, matrix, truth


def run_benchmark_cell(
    setting: Setting | str,
    sigma: float,
    metric_spec: LeadLagMetricSpec,
    n_reps: int,
    seed: int,
    algorithms: Sequence[str] = (),
    k: int | None = None,
    T: int = DEFAULT_T,
    p: int = DEFAULT_P,
) -> EvaluationReport:
    """Edge accuracy plus per-algorithm ARI over repeated panel draws.

    All algorithms cluster the same score matrix within a repetition, so
    algorithm comparisons are paired.  ``k`` defaults to the ground-truth
    cluster count.
    """
    for name in algorithms:
        if name not in ALGORITHMS:
            raise ValueError(f"unknown clustering algorithm: {name}")
    accuracies = np.empty(n_reps)
    aris = {name: np.empty(n_reps) for name in algorithms}
    for rep, matrix, truth in benchmark_runs(setting, sigma, metric_spec, n_reps, seed, T=T, p=p):
        accuracies[rep] = edge_accuracy(matrix, truth)
        if algorithms:
            network = build_network(matrix)
            n_clusters = truth.n_clusters if k is None else k
            config = SpectralConfig(k=n_clusters, seed=derive_seed(seed, rep))
            for name in algorithms:
                labels = ALGORITHMS[name](network, config)
                aris[name][rep] = adjusted_rand_index(labels, truth.labels)
    return EvaluationReport(
        edge_accuracy=float(accuracies.mean()),
        ari={name: float(vals.mean()) for name, vals in aris.items()},
        edge_accuracy_reps=accuracies,
        ari_reps=aris,
    )
