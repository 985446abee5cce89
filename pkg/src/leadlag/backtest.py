"""Rolling cluster-to-cluster trading strategy and its significance tests.

Every ``update_period`` days the pipeline refits on the trailing
``lookback`` window: score matrix, directed network, clustering, meta-flow
threshold mask and through-origin OLS coefficients from EWMA cluster
features to next-day cluster means.  Between refits the daily signal for
cluster j is sign(sum_i mask_ij * theta_ij * x_t^(i)); every equity trades
its cluster's signal and the equal-weighted portfolio return is scaled to a
constant annualized volatility target.  The ablation reruns the replay with
cluster memberships shuffled at every refit, giving a null Sharpe
distribution that isolates the value of the detected structure.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .clustering import ALGORITHMS, SpectralConfig
from .metrics import LeadLagMetricSpec, leadlag_matrix, prepare_panel
from .network import MetaFlowGraph, build_network, meta_flow
from .panel import PanelKind, TimeSeriesPanel
from .seeding import derive_rng, derive_seed

_CLUSTER_TAG = 0xBAC7
_ABLATION_TAG = 0xAB1A

VOL_FLOOR_DAILY = 1e-4


@dataclass(frozen=True)
class BacktestConfig:
    """Strategy parameters; defaults follow the desk setup."""

    lookback: int = 252
    update_period: int = 42
    ewma_alpha: float = 0.4
    flow_quantile: float = 0.90
    vol_window: int = 21
    vol_target_annual: float = 0.10
    k: int = 10
    annualization: int = 252
    seed: int = 0

    def __post_init__(self) -> None:
        if self.lookback <= self.update_period:
            raise ValueError("lookback must exceed update_period")
        if self.update_period < 1:
            raise ValueError("update_period must be >= 1")
        if not 0.0 < self.ewma_alpha < 1.0:
            raise ValueError("ewma_alpha must lie in (0, 1)")
        if not 0.0 < self.flow_quantile < 1.0:
            raise ValueError("flow_quantile must lie in (0, 1)")
        if self.vol_window < 2:
            raise ValueError("vol_window must be >= 2")
        if self.vol_target_annual <= 0.0:
            raise ValueError("vol_target_annual must be positive")
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if self.annualization < 1:
            raise ValueError("annualization must be >= 1")


def ewma_weight_share(alpha: float, n_lags: int) -> float:
    """Share of the infinite EWMA weight mass carried by lags 1..n_lags."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if n_lags < 0:
        raise ValueError("n_lags must be nonnegative")
    return 1.0 - (1.0 - alpha) ** n_lags


def ewma_feature(returns: np.ndarray, alpha: float, t: int) -> float:
    """x_t = sum_{l=1..t} (1-alpha)^{l-1} * returns[t-l]; no lookahead."""
    returns = np.asarray(returns, dtype=float)
    if not 1 <= t <= returns.size:
        raise ValueError("t must lie in 1..len(returns)")
    weights = (1.0 - alpha) ** np.arange(t)
    return float(weights @ returns[t - 1 :: -1][:t])


def _ewma_series(returns: np.ndarray, alpha: float) -> np.ndarray:
    """Row t holds the EWMA feature using returns strictly before row t."""
    T = returns.shape[0]
    out = np.zeros((T + 1,) + returns.shape[1:])
    for t in range(T):
        out[t + 1] = (1.0 - alpha) * out[t] + returns[t]
    return out


def cluster_mean_returns(values: np.ndarray | TimeSeriesPanel, labels: np.ndarray, k: int) -> np.ndarray:
    """Per-day mean return of each cluster's members, shape (T, k)."""
    if isinstance(values, TimeSeriesPanel):
        values = values.values
    labels = np.asarray(labels, dtype=int)
    if labels.size != values.shape[1]:
        raise ValueError("one label per series required")
    sizes = np.bincount(labels, minlength=k)
    if (sizes == 0).any():
        empty = np.flatnonzero(sizes == 0).tolist()
        raise ValueError(f"empty clusters: {empty}")
    member = np.zeros((labels.size, k))
    member[np.arange(labels.size), labels] = 1.0
    return (values @ member) / sizes


def fit_pair_models(
    cluster_returns: np.ndarray,
    window: tuple[int, int],
    alpha: float = 0.4,
) -> np.ndarray:
    """Through-origin OLS slopes theta[i, j] of y^(j) on the EWMA feature x^(i).

    theta[i, j] = sum_t x_t^(i) y_t^(j) / sum_t (x_t^(i))^2 over window days;
    the feature at day t uses returns strictly before t.  Features with zero
    sum of squares yield a zero row with a warning.
    """
    cluster_returns = np.asarray(cluster_returns, dtype=float)
    start, stop = window
    if not 0 <= start < stop <= cluster_returns.shape[0]:
        raise ValueError("window out of range")
    if stop - start < 2:
        raise ValueError("window must cover at least 2 days")
    features = _ewma_series(cluster_returns, alpha)[start:stop]
    targets = cluster_returns[start:stop]
    sum_sq = (features**2).sum(axis=0)
    dead = sum_sq == 0.0
    if dead.any():
        warnings.warn(
            f"zero feature sum of squares for clusters {np.flatnonzero(dead).tolist()}; "
            "their coefficients are set to 0",
            stacklevel=2,
        )
    theta = (features.T @ targets) / np.where(dead, 1.0, sum_sq)[:, None]
    theta[dead] = 0.0
    return theta


def threshold_flow(flow: MetaFlowGraph | np.ndarray, quantile: float) -> np.ndarray:
    """Binary mask keeping flows strictly above the off-diagonal quantile."""
    if not 0.0 <= quantile < 1.0:
        raise ValueError("quantile must lie in [0, 1)")
    matrix = flow.flow if isinstance(flow, MetaFlowGraph) else np.asarray(flow, dtype=float)
    k = matrix.shape[0]
    off = ~np.eye(k, dtype=bool)
    cut = np.quantile(matrix[off], quantile)
    mask = (matrix > cut) & off
    return mask.astype(int)


@dataclass(frozen=True)
class BacktestReport:
    """Daily strategy returns plus summary statistics.

    ``daily_returns`` covers evaluation days only (after the lookback and
    volatility warmup); the ``traded_*`` arrays include the warmup days so
    tests can inspect the raw signal path.
    """

    daily_returns: np.ndarray
    timestamps: np.ndarray
    cumulative_return: np.ndarray
    sharpe_annualized: float
    sharpe_p_value_one_sided: float
    mean_daily_return_bp: float
    market_correlation: float | None
    cluster_signals: np.ndarray
    traded_timestamps: np.ndarray
    unscaled_returns: np.ndarray
    scaled_returns: np.ndarray
    refit_days: tuple[int, ...]
    warmup_days: int


@dataclass(frozen=True)
class _RefitState:
    day: int
    labels: np.ndarray
    adjacency: np.ndarray


def _refit_schedule(n_rows: int, config: BacktestConfig) -> list[int]:
    return list(range(config.lookback, n_rows, config.update_period))


def _fit_refits(
    panel: TimeSeriesPanel,
    metric_spec: LeadLagMetricSpec,
    algorithm: str,
    config: BacktestConfig,
) -> list[_RefitState]:
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown clustering algorithm: {algorithm}")
    states = []
    for index, day in enumerate(_refit_schedule(panel.n_rows, config)):
        window = panel.window(day - config.lookback, day)
        matrix = leadlag_matrix(prepare_panel(window, metric_spec), metric_spec)
        network = build_network(matrix)
        spectral = SpectralConfig(k=config.k, seed=derive_seed(config.seed, _CLUSTER_TAG, index))
        clustering = ALGORITHMS[algorithm](network, spectral)
        states.append(_RefitState(day, np.asarray(clustering.labels), network.adjacency))
    return states


@dataclass(frozen=True)
class _Clustered:
    labels: np.ndarray
    k: int


def _replay(
    values: np.ndarray,
    states: list[_RefitState],
    labels_by_refit: list[np.ndarray],
    config: BacktestConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Signal path for given per-refit memberships.

    Returns (unscaled portfolio returns, per-cluster signals) over traded
    days config.lookback..T-1.
    """
    T = values.shape[0]
    traded = T - config.lookback
    unscaled = np.empty(traded)
    signals = np.empty((traded, config.k), dtype=int)
    for state, labels in zip(states, labels_by_refit):
        block_end = min(state.day + config.update_period, T)
        window_means = cluster_mean_returns(
            values[state.day - config.lookback : state.day], labels, config.k
        )
        theta = fit_pair_models(window_means, (1, config.lookback), config.ewma_alpha)
        flow = meta_flow(state.adjacency, _Clustered(labels, config.k))
        weights = threshold_flow(flow, config.flow_quantile) * theta
        full_means = cluster_mean_returns(values, labels, config.k)
        features = _ewma_series(full_means, config.ewma_alpha)
        for day in range(state.day, block_end):
            signal = np.sign(features[day] @ weights).astype(int)
            signals[day - config.lookback] = signal
            unscaled[day - config.lookback] = (signal[labels] * values[day]).mean()
    return unscaled, signals


def _scale_to_target(unscaled: np.ndarray, config: BacktestConfig) -> np.ndarray:
    """Scale each day by target daily vol over the trailing realized vol.

    The estimate at day t uses the vol_window unscaled returns strictly
    before t, so the first vol_window traded days are warmup.
    """
    target_daily = config.vol_target_annual / np.sqrt(config.annualization)
    scaled = np.full(unscaled.size, np.nan)
    for t in range(config.vol_window, unscaled.size):
        sigma = unscaled[t - config.vol_window : t].std(ddof=1)
        scaled[t] = unscaled[t] * target_daily / max(sigma, VOL_FLOOR_DAILY)
    return scaled


def sharpe_standard_error(daily_returns: np.ndarray) -> float:
    """Asymptotic SE of the daily Sharpe with skew/kurtosis correction."""
    x = np.asarray(daily_returns, dtype=float)
    sd = x.std(ddof=1)
    if sd == 0.0:
        raise ValueError("zero standard deviation")
    sr = x.mean() / sd
    skew = float(stats.skew(x))
    kurt = float(stats.kurtosis(x, fisher=False))
    variance = (1.0 - skew * sr + (kurt - 1.0) / 4.0 * sr**2) / x.size
    return float(np.sqrt(max(variance, 0.0)))


def sharpe_test(daily_returns: np.ndarray, annualization: int) -> tuple[float, float]:
    """Annualized Sharpe ratio and one-sided p-value for SR > 0."""
    x = np.asarray(daily_returns, dtype=float)
    if x.size < 30:
        raise ValueError("need at least 30 observations")
    sd = x.std(ddof=1)
    if sd == 0.0:
        raise ValueError("zero standard deviation")
    sr_daily = x.mean() / sd
    p_value = float(stats.norm.sf(sr_daily / sharpe_standard_error(x)))
    return float(sr_daily * np.sqrt(annualization)), p_value


def run_backtest(
    panel: TimeSeriesPanel,
    metric_spec: LeadLagMetricSpec,
    algorithm: str,
    config: BacktestConfig,
    benchmark_returns: np.ndarray | None = None,
) -> BacktestReport:
    """Full rolling backtest; deterministic given panel, config and seed."""
    if panel.kind is not PanelKind.DIFFERENCES:
        raise ValueError("backtest trades returns; pass a differences panel")
    warmup = config.lookback + config.vol_window
    if panel.n_rows < warmup + 1:
        raise ValueError(
            f"insufficient history: {panel.n_rows} rows < lookback + vol_window + 1 = {warmup + 1}"
        )
    states = _fit_refits(panel, metric_spec, algorithm, config)
    unscaled, signals = _replay(panel.values, states, [s.labels for s in states], config)
    scaled = _scale_to_target(unscaled, config)
    eval_returns = scaled[config.vol_window :]
    sharpe, p_value = sharpe_test(eval_returns, config.annualization)
    market_corr = None
    if benchmark_returns is not None:
        bench = np.asarray(benchmark_returns, dtype=float)
        if bench.shape != (panel.n_rows,):
            raise ValueError("benchmark must align with the panel rows")
        market_corr = float(np.corrcoef(eval_returns, bench[warmup:])[0, 1])
    return BacktestReport(
        daily_returns=eval_returns,
        timestamps=panel.timestamps[warmup:],
        cumulative_return=np.cumsum(eval_returns),
        sharpe_annualized=sharpe,
        sharpe_p_value_one_sided=p_value,
        mean_daily_return_bp=float(eval_returns.mean() * 1e4),
        market_correlation=market_corr,
        cluster_signals=signals,
        traded_timestamps=panel.timestamps[config.lookback :],
        unscaled_returns=unscaled,
        scaled_returns=scaled,
        refit_days=tuple(s.day for s in states),
        warmup_days=config.vol_window,
    )


def _annualized_sharpe(x: np.ndarray, annualization: int) -> float:
    sd = x.std(ddof=1)
    if sd == 0.0:
        return 0.0
    return float(x.mean() / sd * np.sqrt(annualization))


@dataclass(frozen=True)
class AblationResult:
    true_sharpe: float
    null_sharpes: np.ndarray
    p_value: float
    n_replicates: int


def cluster_permutation_ablation(
    panel: TimeSeriesPanel,
    metric_spec: LeadLagMetricSpec,
    algorithm: str,
    config: BacktestConfig,
    n_replicates: int = 100,
) -> AblationResult:
    """Null Sharpe distribution from shuffled cluster memberships.

    Each replicate permutes every refit's label vector across equities
    (cluster sizes preserved), then replays the signal construction on the
    cached score networks.  The add-one rank p-value counts ties.
    """
    if n_replicates < 1:
        raise ValueError("n_replicates must be >= 1")
    if panel.kind is not PanelKind.DIFFERENCES:
        raise ValueError("backtest trades returns; pass a differences panel")
    states = _fit_refits(panel, metric_spec, algorithm, config)

    def replay_sharpe(labels_by_refit: list[np.ndarray]) -> float:
        unscaled, _ = _replay(panel.values, states, labels_by_refit, config)
        scaled = _scale_to_target(unscaled, config)
        return _annualized_sharpe(scaled[config.vol_window :], config.annualization)

    true_sharpe = replay_sharpe([s.labels for s in states])
    nulls = np.empty(n_replicates)
    for rep in range(n_replicates):
        rng = derive_rng(config.seed, _ABLATION_TAG, rep)
        nulls[rep] = replay_sharpe(
            [state.labels[rng.permutation(state.labels.size)] for state in states]
        )
    p_value = (1.0 + float(np.count_nonzero(nulls >= true_sharpe))) / (n_replicates + 1.0)
    return AblationResult(true_sharpe, nulls, p_value, n_replicates)
