"""Lead-lag detection, clustering and trading for multivariate time series.

The pipeline scores every ordered pair of series with an antisymmetric
lead-lag metric, keeps the positive part as a directed network, partitions
it with spectral algorithms (including a Hermitian method that targets
directional flow), ranks clusters by leadingness, and can trade the
detected structure with a rolling vol-targeted strategy.  Synthetic
generators with known ground truth plus permutation and ablation tests
provide end-to-end validation.
"""

from .backtest import (
    AblationResult,
    BacktestConfig,
    BacktestReport,
    cluster_mean_returns,
    cluster_permutation_ablation,
    ewma_feature,
    ewma_weight_share,
    fit_pair_models,
    run_backtest,
    sharpe_test,
    threshold_flow,
)
from .clustering import (
    ALGORITHMS,
    Clustering,
    SpectralConfig,
    bibliometric_symmetrization,
    cluster_bibliometric,
    cluster_disim,
    cluster_hermitian_rw,
    cluster_naive,
    disim_laplacian,
    hermitian_matrix,
    kmeans,
)
from .evaluation import (
    EvaluationReport,
    PermutationTestResult,
    adjusted_rand_index,
    edge_accuracy,
    gaussian_ci,
    jaccard_matrix,
    permutation_test_largest_eigenvalue,
    run_benchmark_cell,
    spearman_attribute_correlation,
)
from .metrics import (
    CorrelationKind,
    CorrelationVariant,
    Functional,
    LeadLagMatrix,
    LeadLagMetricSpec,
    ccf,
    ccf_auc,
    ccf_lag1,
    leadlag_matrix,
    parse_metric_label,
    prepare_panel,
    sample_correlation,
    signature_leadlag,
)
from .network import (
    DirectedNetwork,
    LeadingnessRanking,
    MetaFlowGraph,
    build_network,
    leadingness,
    meta_flow,
    subsample_edges,
    threshold_scores,
)
from .panel import (
    PanelKind,
    PanelSchema,
    TimeSeriesPanel,
    load_panel,
    normalize_series,
    to_cumulative_levels,
    to_log_returns,
)
from .seeding import derive_rng, derive_seed
from .synthetic import (
    SIGMA_GRID,
    GroundTruth,
    Setting,
    SyntheticSpec,
    default_spec,
    generate,
    ground_truth_for,
    hermite_poly,
    legendre_poly,
    load_truth,
    save_truth,
)

__version__ = "0.1.0"
