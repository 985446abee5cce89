"""Command-line front end for the lead-lag pipeline.

Six subcommands cover the workflow end to end: ``metrics`` scores a panel,
``cluster`` partitions a score matrix, ``synth-bench`` runs the synthetic
benchmark grid, ``permtest`` and ``backtest`` run the significance tests and
the trading strategy, and ``eval`` grades outputs against a ground-truth
sidecar.  Every run writes a resolved ``config.json`` snapshot to its output
directory; re-running a command with ``--config <snapshot>`` reproduces the
CSV/JSON outputs byte for byte.  Exit codes: 0 success, 1 runtime or data
error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .backtest import BacktestConfig, cluster_permutation_ablation, run_backtest
from .clustering import ALGORITHMS, Clustering, SpectralConfig, clustering_json
from .evaluation import (
    adjusted_rand_index,
    edge_accuracy,
    gaussian_ci,
    jaccard_matrix,
    permutation_test_largest_eigenvalue,
    run_benchmark_cell,
)
from .metrics import LeadLagMatrix, leadlag_matrix, parse_metric_label, prepare_panel
from .network import (
    build_network,
    leadingness,
    meta_flow,
    meta_flow_dot,
    meta_flow_json,
    threshold_scores,
)
from .panel import PanelKind, TimeSeriesPanel, load_panel, to_log_returns
from .seeding import derive_seed
from .synthetic import SIGMA_GRID, Setting, default_spec, ground_truth_for, load_truth

_SETTING_NAMES = tuple(s.value for s in Setting)
_CORR_NAMES = ("pearson", "kendall", "dcor", "mi")
_FUNCTIONAL_NAMES = ("ccf-lag1", "ccf-auc", "signature")

_SNAPSHOT_EXCLUDED = {"handler", "command", "config"}


class UsageError(Exception):
    """Bad flag combination or config contents; maps to exit code 2."""


# ---------------------------------------------------------------------------
# small I/O helpers


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])


def _require_file(path_str: str, label: str) -> Path:
    path = Path(path_str)
    if not path.is_file():
        raise FileNotFoundError(f"{label} not found: {path}")
    return path


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _snapshot(args, **resolved) -> dict:
    payload = {k: v for k, v in vars(args).items() if k not in _SNAPSHOT_EXCLUDED}
    payload.update(resolved)
    payload["command"] = args.command
    return payload


def _load_input_panel(args) -> TimeSeriesPanel:
    """Read the input CSV as levels (gap-tolerant) or differences (strict)."""
    path = _require_file(args.input, "input file")
    if args.input_kind == "levels":
        return load_panel(path)
    return TimeSeriesPanel.from_csv(path, PanelKind.DIFFERENCES)


def _metric_spec(args):
    """Metric spec from flags; flag contradictions are usage errors."""
    label = args.functional
    if args.corr is not None:
        label = f"{args.functional}/{args.corr}"
    try:
        return parse_metric_label(label, max_lag=args.max_lag, mi_bins=args.mi_bins)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _returns_panel(panel: TimeSeriesPanel) -> TimeSeriesPanel:
    if panel.kind is PanelKind.LEVELS:
        return to_log_returns(panel)
    return panel


def _resolved_metric_fields(spec) -> dict:
    return {
        "functional": spec.functional.value,
        "corr": None if spec.correlation is None else spec.correlation.label,
        "max_lag": spec.max_lag,
    }


def _line_plot(path: Path, lines: list[tuple], xlabel: str, ylabel: str, title: str) -> None:
    """lines: (label, x, mean, halfwidth-or-None) tuples."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for label, x, mean, half in lines:
        x = np.asarray(x, dtype=float)
        mean = np.asarray(mean, dtype=float)
        ax.plot(x, mean, marker="o", markersize=3, linewidth=1.2, label=label)
        if half is not None:
            half = np.asarray(half, dtype=float)
            ax.fill_between(x, mean - half, mean + half, alpha=0.15)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    if lines:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# ---------------------------------------------------------------------------
# metrics


def _cmd_metrics(args) -> int:
    spec = _metric_spec(args)
    panel = _load_input_panel(args)
    if spec.functional.value != "signature":
        panel = _returns_panel(panel)
    matrix = leadlag_matrix(prepare_panel(panel, spec), spec)
    out = _out_dir(args)
    matrix.to_csv(out / "matrix.csv")
    matrix.save_edge_list(out / "edges.json")
    _write_json(out / "config.json", _snapshot(args, **_resolved_metric_fields(spec)))
    print(f"wrote {out / 'matrix.csv'} and {out / 'edges.json'} ({matrix.n_series} series)")
    return 0


# ---------------------------------------------------------------------------
# cluster


def _algorithm_key(algo: str, side: str | None) -> str:
    if algo == "disim":
        return f"disim-{side or 'left'}"
    if side is not None:
        raise UsageError("--side applies to the disim algorithm only")
    return algo


def _cmd_cluster(args) -> int:
    matrix = LeadLagMatrix.from_csv(_require_file(args.matrix, "matrix file"))
    if args.k > matrix.n_series:
        raise UsageError(
            f"k={args.k} exceeds the number of series ({matrix.n_series})"
        )
    algo_key = _algorithm_key(args.algo, args.side)
    if args.edge_threshold_quantile > 0.0:
        matrix = threshold_scores(matrix, args.edge_threshold_quantile)
    network = build_network(matrix)
    config = SpectralConfig(
        k=args.k,
        n_eigenvectors=args.n_eigenvectors,
        eig_tolerance=args.eig_tolerance,
        seed=args.seed,
    )
    clustering = ALGORITHMS[algo_key](network, config)
    flow = meta_flow(network, clustering)
    ranking = leadingness(network, clustering)

    out = _out_dir(args)
    _write_json(
        out / "clustering.json",
        clustering_json(clustering, matrix.series_ids, algo_key, args.seed, ranking.cluster_scores),
    )
    _write_json(out / "metaflow.json", meta_flow_json(flow, ranking))
    (out / "metaflow.dot").write_text(meta_flow_dot(flow, ranking))
    sizes = clustering.sizes()
    rows = [
        [rank, int(c), int(sizes[c]), float(ranking.cluster_scores[c])]
        for rank, c in enumerate(ranking.order)
    ]
    _write_csv(out / "leadingness.csv", ["rank", "cluster", "size", "leadingness"], rows)
    _write_json(out / "config.json", _snapshot(args))
    leader = int(ranking.order[0])
    print(
        f"clustered {matrix.n_series} series into {args.k} clusters with {algo_key}; "
        f"most leading cluster {leader} (score {ranking.cluster_scores[leader]:.4f})"
    )
    return 0


# ---------------------------------------------------------------------------
# synth-bench


def _bench_cell(task: dict) -> list[list]:
    """One (setting, sigma, metric, k) cell; returns tidy CSV rows."""
    spec = parse_metric_label(task["metric"], max_lag=task["max_lag"], mi_bins=task["mi_bins"])
    synth = default_spec(task["setting"], task["sigma"], T=task["T"], p=task["p"])
    truth_k = ground_truth_for(synth.lag_assignment, synth.factor_assignment).n_clusters
    k = task["k"] if task["k"] is not None else truth_k
    report = run_benchmark_cell(
        task["setting"],
        task["sigma"],
        spec,
        task["reps"],
        task["seed"],
        algorithms=task["algos"],
        k=k,
        T=task["T"],
        p=task["p"],
    )
    rows = []
    for rep in range(report.n_reps):
        accuracy = float(report.edge_accuracy_reps[rep])
        if task["algos"]:
            for algo in task["algos"]:
                rows.append(
                    [
                        task["setting"],
                        task["sigma"],
                        task["metric"],
                        algo,
                        k,
                        rep,
                        accuracy,
                        float(report.ari_reps[algo][rep]),
                    ]
                )
        else:
            rows.append(
                [task["setting"], task["sigma"], task["metric"], None, k, rep, accuracy, None]
            )
    return rows


def _mean_ci_by(rows: list[list], key_cols: tuple[int, ...], value_col: int) -> dict:
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        if row[value_col] is None:
            continue
        groups.setdefault(tuple(row[c] for c in key_cols), []).append(row[value_col])
    return {key: gaussian_ci(np.array(vals)) for key, vals in groups.items()}


def _bench_plots(out: Path, rows: list[list], args) -> list[Path]:
    written = []
    primary_k_rows = [r for r in rows if args.k_sweep is None or r[4] == args.k_sweep[0]]
    for setting in args.settings:
        srows = [r for r in rows if r[0] == setting]
        if not srows:
            continue
        acc = _mean_ci_by(srows, (2, 1), 6)
        acc_lines = []
        for metric in args.metrics:
            xs = sorted({r[1] for r in srows if r[2] == metric})
            if not xs:
                continue
            mean = [acc[(metric, x)][0] for x in xs]
            half = [acc[(metric, x)][1] for x in xs]
            acc_lines.append((metric, xs, mean, half))
        path = out / f"accuracy_{setting}.png"
        _line_plot(path, acc_lines, "noise sd", "edge accuracy", f"{setting}: edge accuracy")
        written.append(path)
        if args.algos:
            sprim = [r for r in primary_k_rows if r[0] == setting]
            ari = _mean_ci_by(sprim, (2, 3, 1), 7)
            ari_lines = []
            for metric in args.metrics:
                for algo in args.algos:
                    xs = sorted({r[1] for r in sprim if r[2] == metric and r[3] == algo})
                    if not xs:
                        continue
                    mean = [ari[(metric, algo, x)][0] for x in xs]
                    half = [ari[(metric, algo, x)][1] for x in xs]
                    ari_lines.append((f"{metric} {algo}", xs, mean, half))
            path = out / f"ari_{setting}.png"
            _line_plot(path, ari_lines, "noise sd", "ARI", f"{setting}: clustering ARI")
            written.append(path)
        if args.k_sweep is not None and args.algos:
            ksw = _mean_ci_by(srows, (2, 3, 1, 4), 7)
            lines = []
            for metric in args.metrics:
                for algo in args.algos:
                    for sigma in args.sigmas:
                        ks = sorted(
                            {r[4] for r in srows if r[2] == metric and r[3] == algo and r[1] == sigma}
                        )
                        if not ks:
                            continue
                        mean = [ksw[(metric, algo, sigma, kk)][0] for kk in ks]
                        half = [ksw[(metric, algo, sigma, kk)][1] for kk in ks]
                        lines.append((f"{metric} {algo} sigma={sigma:g}", ks, mean, half))
            path = out / f"ksweep_{setting}.png"
            _line_plot(path, lines, "k", "ARI", f"{setting}: ARI vs cluster count")
            written.append(path)
    return written


def _cmd_synth_bench(args) -> int:
    for metric in args.metrics:
        try:
            parse_metric_label(metric, max_lag=args.max_lag, mi_bins=args.mi_bins)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    for algo in args.algos:
        if algo not in ALGORITHMS:
            raise UsageError(f"unknown clustering algorithm: {algo}")
    ks: list[int | None] = list(args.k_sweep) if args.k_sweep is not None else [args.k]
    tasks = []
    for si, setting in enumerate(args.settings):
        for gi, sigma in enumerate(args.sigmas):
            cell_seed = derive_seed(args.seed, si, gi)
            for metric in args.metrics:
                for k in ks:
                    tasks.append(
                        {
                            "setting": setting,
                            "sigma": sigma,
                            "metric": metric,
                            "algos": list(args.algos),
                            "k": k,
                            "reps": args.reps,
                            "seed": cell_seed,
                            "T": args.T,
                            "p": args.p,
                            "max_lag": args.max_lag,
                            "mi_bins": args.mi_bins,
                        }
                    )
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            per_task = list(pool.map(_bench_cell, tasks))
    else:
        per_task = [_bench_cell(task) for task in tasks]
    rows = [row for chunk in per_task for row in chunk]

    out = _out_dir(args)
    header = ["setting", "sigma", "metric", "algorithm", "k", "rep", "edge_accuracy", "ari"]
    _write_csv(out / "results.csv", header, rows)
    _write_json(out / "config.json", _snapshot(args))
    print(f"wrote {out / 'results.csv'} ({len(rows)} rows from {len(tasks)} cells)")
    if args.plots:
        for path in _bench_plots(out, rows, args):
            print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# permtest


def _cmd_permtest(args) -> int:
    spec = _metric_spec(args)
    panel = _returns_panel(_load_input_panel(args))
    result = permutation_test_largest_eigenvalue(panel, spec, n_mc=args.n_mc, seed=args.seed)
    out = _out_dir(args)
    _write_json(
        out / "permtest.json",
        {
            "observed_statistic": result.observed_statistic,
            "p_value": result.p_value,
            "n_monte_carlo": result.n_monte_carlo,
            "null_samples": [float(v) for v in result.null_samples],
        },
    )
    _write_json(out / "config.json", _snapshot(args, **_resolved_metric_fields(spec)))
    print(
        f"observed statistic {result.observed_statistic:.6f}, "
        f"p-value {result.p_value:.6f} ({result.n_monte_carlo} replicates)"
    )
    return 0


# ---------------------------------------------------------------------------
# backtest


def _cmd_backtest(args) -> int:
    spec = _metric_spec(args)
    algo_key = _algorithm_key(args.algo, args.side)
    panel = _returns_panel(_load_input_panel(args))
    benchmark = None
    if args.benchmark_column is not None:
        if args.benchmark_column not in panel.series_ids:
            raise UsageError(f"benchmark column {args.benchmark_column!r} not in panel")
        col = panel.series_ids.index(args.benchmark_column)
        benchmark = panel.values[:, col]
        panel = panel.select([s for s in panel.series_ids if s != args.benchmark_column])
    config = BacktestConfig(
        lookback=args.lookback,
        update_period=args.update_period,
        ewma_alpha=args.ewma_alpha,
        flow_quantile=args.flow_quantile,
        vol_window=args.vol_window,
        vol_target_annual=args.vol_target,
        k=args.k,
        annualization=args.annualization,
        seed=args.seed,
    )
    report = run_backtest(panel, spec, algo_key, config, benchmark_returns=benchmark)
    out = _out_dir(args)
    _write_json(
        out / "report.json",
        {
            "sharpe_annualized": report.sharpe_annualized,
            "sharpe_p_value_one_sided": report.sharpe_p_value_one_sided,
            "mean_daily_return_bp": report.mean_daily_return_bp,
            "market_correlation": report.market_correlation,
            "n_days": int(report.daily_returns.size),
            "refit_days": list(report.refit_days),
            "warmup_days": report.warmup_days,
        },
    )
    stamps = [str(t) for t in report.timestamps]
    rows = [
        [stamps[t], float(report.daily_returns[t]), float(report.cumulative_return[t])]
        for t in range(report.daily_returns.size)
    ]
    _write_csv(out / "daily_returns.csv", ["timestamp", "daily_return", "cumulative_return"], rows)
    print(
        f"sharpe {report.sharpe_annualized:.4f}, one-sided p {report.sharpe_p_value_one_sided:.6f}, "
        f"mean daily return {report.mean_daily_return_bp:.3f} bp over {report.daily_returns.size} days"
    )
    if args.plots:
        path = out / "equity_curve.png"
        _line_plot(
            path,
            [("strategy", np.arange(report.cumulative_return.size), report.cumulative_return, None)],
            "evaluation day",
            "cumulative return",
            "cumulative strategy return",
        )
        print(f"wrote {path}")
    if args.ablate_permuted_clusters:
        ablation = cluster_permutation_ablation(
            panel, spec, algo_key, config, n_replicates=args.n_mc
        )
        nulls = np.sort(ablation.null_sharpes)
        _write_json(
            out / "ablation.json",
            {
                "true_sharpe": ablation.true_sharpe,
                "p_value": ablation.p_value,
                "n_replicates": ablation.n_replicates,
                "null_sharpe_95th": float(np.quantile(ablation.null_sharpes, 0.95)),
                "null_sharpes": [float(v) for v in ablation.null_sharpes],
            },
        )
        print(
            f"ablation: true sharpe {ablation.true_sharpe:.4f} vs null 95th pct "
            f"{np.quantile(ablation.null_sharpes, 0.95):.4f}, p {ablation.p_value:.6f} "
            f"({ablation.n_replicates} permuted replicates)"
        )
        if args.plots:
            path = out / "ablation.png"
            _line_plot(
                path,
                [
                    ("null sharpes (sorted)", np.arange(nulls.size), nulls, None),
                    (
                        "true sharpe",
                        np.arange(nulls.size),
                        np.full(nulls.size, ablation.true_sharpe),
                        None,
                    ),
                ],
                "replicate rank",
                "annualized sharpe",
                "permuted-clustering ablation",
            )
            print(f"wrote {path}")
    _write_json(out / "config.json", _snapshot(args, **_resolved_metric_fields(spec)))
    return 0


# ---------------------------------------------------------------------------
# eval


def _labels_from_clustering_file(path: Path, series_ids: tuple[str, ...]) -> Clustering:
    payload = json.loads(path.read_text())
    mapping = payload.get("labels")
    if not isinstance(mapping, dict):
        raise ValueError(f"{path}: expected a clustering JSON with a 'labels' mapping")
    missing = [s for s in series_ids if s not in mapping]
    if missing:
        raise ValueError(f"{path}: missing labels for series {missing[:5]}")
    labels = np.array([int(mapping[s]) for s in series_ids])
    return Clustering(labels, int(payload.get("k", labels.max() + 1)))


def _cmd_eval(args) -> int:
    if args.matrix is None and args.clustering is None:
        raise UsageError("pass --matrix and/or --clustering to evaluate")
    truth, truth_ids = load_truth(_require_file(args.truth, "truth file"))
    payload: dict = {"n_series": len(truth_ids)}
    if args.matrix is not None:
        matrix = LeadLagMatrix.from_csv(_require_file(args.matrix, "matrix file"))
        if matrix.series_ids != truth_ids:
            raise ValueError("matrix series ids do not match the truth sidecar")
        payload["edge_accuracy"] = edge_accuracy(matrix, truth)
    if args.clustering is not None:
        clustering = _labels_from_clustering_file(
            _require_file(args.clustering, "clustering file"), truth_ids
        )
        payload["ari"] = adjusted_rand_index(clustering, truth.labels)
        payload["jaccard"] = [
            [float(v) for v in row] for row in jaccard_matrix(clustering, truth.labels)
        ]
    out = _out_dir(args)
    _write_json(out / "eval.json", payload)
    _write_json(out / "config.json", _snapshot(args))
    parts = [f"{key}={payload[key]:.4f}" for key in ("edge_accuracy", "ari") if key in payload]
    print("evaluation: " + (", ".join(parts) if parts else "jaccard only"))
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def _add_metric_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--functional", choices=_FUNCTIONAL_NAMES, default="ccf-auc")
    sp.add_argument("--corr", choices=_CORR_NAMES, default=None,
                    help="correlation measure for the ccf functionals (default pearson)")
    sp.add_argument("--max-lag", type=int, default=None,
                    help="lag window for ccf-auc (default 5)")
    sp.add_argument("--mi-bins", type=int, default=8)


def _add_input_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--input", required=True, help="panel CSV path")
    sp.add_argument("--input-kind", choices=("levels", "differences"), default="differences",
                    help="levels are gap-filled and converted to log returns where needed")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="leadlag",
        description="Detect, cluster and trade lead-lag structure in multivariate time series.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    registry: dict[str, argparse.ArgumentParser] = {}

    def register(name: str, help_text: str, handler) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.add_argument("--config", default=None,
                        help="JSON snapshot whose values become option defaults")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=0, help="master seed")
        sp.set_defaults(handler=handler)
        registry[name] = sp
        return sp

    sp = register("metrics", "score a panel into a skew-symmetric lead-lag matrix", _cmd_metrics)
    _add_input_flags(sp)
    _add_metric_flags(sp)

    sp = register("cluster", "cluster a lead-lag matrix and rank clusters by leadingness", _cmd_cluster)
    sp.add_argument("--matrix", required=True, help="lead-lag matrix CSV")
    sp.add_argument("--algo", choices=("naive", "bibliometric", "disim", "hermitian-rw"),
                    default="hermitian-rw")
    sp.add_argument("--side", choices=("left", "right"), default=None,
                    help="singular-vector side for disim")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--n-eigenvectors", type=int, default=None)
    sp.add_argument("--eig-tolerance", type=float, default=1e-8)
    sp.add_argument("--edge-threshold-quantile", type=float, default=0.0,
                    help="drop score pairs at or below this |S| quantile before clustering")

    sp = register("synth-bench", "accuracy/ARI grid over synthetic generators", _cmd_synth_bench)
    sp.add_argument("--settings", nargs="+", choices=_SETTING_NAMES, default=["linear"])
    sp.add_argument("--sigmas", nargs="+", type=float, default=list(SIGMA_GRID))
    sp.add_argument("--metrics", nargs="+", default=["ccf-auc/pearson"],
                    help="metric labels like ccf-auc/dcor or signature")
    sp.add_argument("--algos", nargs="*", default=["hermitian-rw"],
                    help="clustering algorithms; empty for accuracy only")
    sp.add_argument("--reps", type=int, default=16)
    sp.add_argument("--k", type=int, default=None,
                    help="cluster count (default: ground-truth count)")
    sp.add_argument("--k-sweep", nargs="+", type=int, default=None,
                    help="sweep these cluster counts instead of --k")
    sp.add_argument("--max-lag", type=int, default=None)
    sp.add_argument("--mi-bins", type=int, default=8)
    sp.add_argument("--T", type=int, default=250)
    sp.add_argument("--p", type=int, default=100)
    sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sp.add_argument("--no-plots", dest="plots", action="store_false")

    sp = register("permtest", "row-permutation significance test for detected structure", _cmd_permtest)
    _add_input_flags(sp)
    _add_metric_flags(sp)
    sp.add_argument("--n-mc", type=int, default=200)

    sp = register("backtest", "rolling cluster lead-lag strategy with vol targeting", _cmd_backtest)
    _add_input_flags(sp)
    _add_metric_flags(sp)
    sp.add_argument("--algo", choices=("naive", "bibliometric", "disim", "hermitian-rw"),
                    default="hermitian-rw")
    sp.add_argument("--side", choices=("left", "right"), default=None)
    sp.add_argument("--lookback", type=int, default=252)
    sp.add_argument("--update-period", type=int, default=42)
    sp.add_argument("--ewma-alpha", type=float, default=0.4)
    sp.add_argument("--flow-quantile", type=float, default=0.90)
    sp.add_argument("--vol-window", type=int, default=21)
    sp.add_argument("--vol-target", type=float, default=0.10)
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--annualization", type=int, default=252)
    sp.add_argument("--benchmark-column", default=None,
                    help="panel column to hold out as the market benchmark")
    sp.add_argument("--ablate-permuted-clusters", action="store_true")
    sp.add_argument("--n-mc", type=int, default=200, help="ablation replicates")
    sp.add_argument("--no-plots", dest="plots", action="store_false")

    sp = register("eval", "grade matrix/clustering files against a truth sidecar", _cmd_eval)
    sp.add_argument("--truth", required=True, help="ground-truth JSON sidecar")
    sp.add_argument("--matrix", default=None, help="lead-lag matrix CSV to grade")
    sp.add_argument("--clustering", default=None, help="clustering JSON to grade")

    return parser, registry


def _apply_config_defaults(sp: argparse.ArgumentParser, command: str, argv: list[str]) -> None:
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise UsageError("--config requires a path")
    path = Path(argv[idx + 1])
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise UsageError("config must be a JSON object")
    payload = dict(payload)
    stored_command = payload.pop("command", None)
    if stored_command is not None and stored_command != command:
        raise UsageError(
            f"config snapshot came from {stored_command!r}, not {command!r}"
        )
    valid = {action.dest for action in sp._actions}
    unknown = sorted(set(payload) - valid)
    if unknown:
        raise UsageError("unknown config keys: " + ", ".join(unknown))
    sp.set_defaults(**payload)
    for action in sp._actions:
        if action.required and action.dest in payload:
            action.required = False


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser, registry = build_parser()
    if argv and argv[0] in registry and "--config" in argv:
        try:
            _apply_config_defaults(registry[argv[0]], argv[0], argv)
        except UsageError as exc:
            print(f"usage error: {exc}", file=sys.stderr)
            return 2
        except FileNotFoundError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 2
    if getattr(args, "handler", None) is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        return int(args.handler(args) or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
