"""End-to-end exercises of the command-line interface.

Each test drives ``leadlag.cli.main`` in process with a real argv, then
inspects exit codes and the files written to a temp directory.  Numeric
behavior is covered by the per-module suites; here the concerns are wiring,
exit-code contracts, config-snapshot reproducibility and worker parity.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from leadlag.cli import main
from leadlag.metrics import LeadLagMatrix, leadlag_matrix, parse_metric_label, prepare_panel
from leadlag.panel import PanelKind, TimeSeriesPanel
from leadlag.synthetic import Setting, SyntheticSpec, generate, save_truth


def run(argv: list) -> int:
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory) -> Path:
    """Shared read-only inputs: planted panels, a score matrix, a truth file."""
    root = tmp_path_factory.mktemp("cli_data")
    lags = tuple(i // 3 for i in range(12))

    spec = SyntheticSpec(Setting.LINEAR, T=160, p=12, sigma=0.0, lag_assignment=lags, seed=5)
    panel, truth = generate(spec)
    panel.to_csv(root / "panel.csv")
    save_truth(truth, panel.series_ids, root / "truth.json")
    metric = parse_metric_label("ccf-auc/pearson")
    leadlag_matrix(prepare_panel(panel, metric), metric).to_csv(root / "matrix.csv")

    noisy_spec = SyntheticSpec(Setting.LINEAR, T=220, p=12, sigma=0.5, lag_assignment=lags, seed=11)
    generate(noisy_spec)[0].to_csv(root / "trading.csv")

    rng = np.random.default_rng(3)
    levels = np.exp(np.cumsum(rng.normal(0.0, 0.01, (50, 4)), axis=0))
    ids = tuple(f"a{j}" for j in range(4))
    TimeSeriesPanel(np.arange(1, 51), ids, levels, PanelKind.LEVELS).to_csv(root / "levels.csv")
    return root


class TestTopLevel:
    def test_no_subcommand_is_usage_error(self, capsys):
        assert run([]) == 2

    def test_help_exits_zero(self):
        assert run(["--help"]) == 0

    def test_unknown_subcommand(self):
        assert run(["frobnicate"]) == 2


class TestMetricsCommand:
    def test_writes_matrix_edges_and_snapshot(self, data_dir, tmp_path):
        out = tmp_path / "out"
        code = run(["metrics", "--input", data_dir / "panel.csv", "--out", out])
        assert code == 0
        matrix = LeadLagMatrix.from_csv(out / "matrix.csv")
        assert matrix.n_series == 12
        assert np.max(np.abs(matrix.scores + matrix.scores.T)) == 0.0
        edges = json.loads((out / "edges.json").read_text())
        assert isinstance(edges, list)
        snapshot = json.loads((out / "config.json").read_text())
        assert snapshot["command"] == "metrics"
        assert snapshot["corr"] == "pearson"
        assert snapshot["max_lag"] == 5

    def test_levels_input_converted_to_returns(self, data_dir, tmp_path):
        code = run([
            "metrics", "--input", data_dir / "levels.csv",
            "--input-kind", "levels", "--out", tmp_path,
        ])
        assert code == 0
        assert LeadLagMatrix.from_csv(tmp_path / "matrix.csv").n_series == 4

    def test_signature_functional_runs(self, data_dir, tmp_path):
        code = run([
            "metrics", "--input", data_dir / "panel.csv",
            "--functional", "signature", "--out", tmp_path,
        ])
        assert code == 0

    def test_signature_with_corr_is_usage_error(self, data_dir, tmp_path, capsys):
        code = run([
            "metrics", "--input", data_dir / "panel.csv",
            "--functional", "signature", "--corr", "pearson", "--out", tmp_path,
        ])
        assert code == 2
        assert "usage error" in capsys.readouterr().err

    def test_missing_input_file(self, tmp_path, capsys):
        code = run(["metrics", "--input", tmp_path / "nope.csv", "--out", tmp_path])
        assert code == 1
        assert "not found" in capsys.readouterr().err

    def test_snapshot_rerun_is_byte_identical(self, data_dir, tmp_path):
        first = tmp_path / "first"
        again = tmp_path / "again"
        run(["metrics", "--input", data_dir / "panel.csv", "--max-lag", "7", "--out", first])
        code = run(["metrics", "--config", first / "config.json", "--out", again])
        assert code == 0
        for name in ("matrix.csv", "edges.json"):
            assert (again / name).read_bytes() == (first / name).read_bytes()
        assert json.loads((again / "config.json").read_text())["max_lag"] == 7

    def test_flags_override_config_values(self, data_dir, tmp_path):
        first = tmp_path / "first"
        third = tmp_path / "third"
        run(["metrics", "--input", data_dir / "panel.csv", "--max-lag", "7", "--out", first])
        code = run([
            "metrics", "--config", first / "config.json", "--max-lag", "3", "--out", third,
        ])
        assert code == 0
        assert json.loads((third / "config.json").read_text())["max_lag"] == 3
        assert (third / "matrix.csv").read_bytes() != (first / "matrix.csv").read_bytes()

    def test_unknown_config_key(self, data_dir, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"command": "metrics", "bogus": 1}))
        assert run(["metrics", "--config", bad, "--out", tmp_path]) == 2
        assert "unknown config keys: bogus" in capsys.readouterr().err

    def test_config_from_other_command_rejected(self, data_dir, tmp_path, capsys):
        snap = tmp_path / "snap.json"
        snap.write_text(json.dumps({"command": "cluster"}))
        assert run(["metrics", "--config", snap, "--out", tmp_path]) == 2
        assert "came from 'cluster'" in capsys.readouterr().err

    def test_config_invalid_json(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("not json")
        assert run(["metrics", "--config", bad, "--out", tmp_path]) == 2

    def test_config_file_missing(self, tmp_path):
        assert run(["metrics", "--config", tmp_path / "nope.json", "--out", tmp_path]) == 1


class TestClusterCommand:
    def test_writes_all_outputs(self, data_dir, tmp_path):
        code = run([
            "cluster", "--matrix", data_dir / "matrix.csv",
            "--algo", "hermitian-rw", "--k", "4", "--out", tmp_path,
        ])
        assert code == 0
        payload = json.loads((tmp_path / "clustering.json").read_text())
        labels = payload["labels"]
        assert sorted(labels) == [f"s{i:03d}" for i in range(1, 13)]
        assert set(labels.values()) == {0, 1, 2, 3}
        assert json.loads((tmp_path / "metaflow.json").read_text())
        assert "digraph" in (tmp_path / "metaflow.dot").read_text()
        lines = (tmp_path / "leadingness.csv").read_text().splitlines()
        assert lines[0] == "rank,cluster,size,leadingness"
        assert len(lines) == 5

    def test_disim_side_selection(self, data_dir, tmp_path):
        code = run([
            "cluster", "--matrix", data_dir / "matrix.csv",
            "--algo", "disim", "--side", "right", "--k", "4", "--out", tmp_path,
        ])
        assert code == 0
        assert json.loads((tmp_path / "clustering.json").read_text())["algorithm"] == "disim-right"

    def test_side_without_disim_is_usage_error(self, data_dir, tmp_path, capsys):
        code = run([
            "cluster", "--matrix", data_dir / "matrix.csv",
            "--algo", "naive", "--side", "left", "--k", "4", "--out", tmp_path,
        ])
        assert code == 2
        assert "disim" in capsys.readouterr().err

    def test_k_larger_than_panel_is_usage_error(self, data_dir, tmp_path):
        code = run([
            "cluster", "--matrix", data_dir / "matrix.csv", "--k", "99", "--out", tmp_path,
        ])
        assert code == 2

    def test_edge_threshold_quantile(self, data_dir, tmp_path):
        code = run([
            "cluster", "--matrix", data_dir / "matrix.csv", "--k", "4",
            "--edge-threshold-quantile", "0.5", "--out", tmp_path,
        ])
        assert code == 0

    def test_non_matrix_csv_rejected(self, data_dir, tmp_path, capsys):
        code = run([
            "cluster", "--matrix", data_dir / "panel.csv", "--k", "4", "--out", tmp_path,
        ])
        assert code == 1
        assert "score-matrix" in capsys.readouterr().err

    def test_reruns_are_deterministic(self, data_dir, tmp_path):
        outs = []
        for name in ("one", "two"):
            out = tmp_path / name
            run(["cluster", "--matrix", data_dir / "matrix.csv", "--k", "4", "--out", out])
            outs.append(out)
        for name in ("clustering.json", "metaflow.json", "leadingness.csv"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


BENCH_ARGS = [
    "synth-bench", "--settings", "linear", "--sigmas", "0", "1",
    "--metrics", "ccf-auc/pearson", "--algos", "hermitian-rw",
    "--reps", "2", "--T", "60", "--p", "20", "--seed", "4", "--no-plots",
]


class TestSynthBenchCommand:
    def test_results_grid_shape(self, tmp_path):
        assert run([*BENCH_ARGS, "--out", tmp_path]) == 0
        lines = (tmp_path / "results.csv").read_text().splitlines()
        assert lines[0] == "setting,sigma,metric,algorithm,k,rep,edge_accuracy,ari"
        # 2 sigmas x 2 reps x 1 algorithm
        assert len(lines) == 5

    def test_parallel_jobs_match_serial(self, tmp_path):
        serial = tmp_path / "serial"
        parallel = tmp_path / "parallel"
        run([*BENCH_ARGS, "--jobs", "1", "--out", serial])
        run([*BENCH_ARGS, "--jobs", "2", "--out", parallel])
        assert (parallel / "results.csv").read_bytes() == (serial / "results.csv").read_bytes()

    def test_snapshot_rerun_is_byte_identical(self, tmp_path):
        first = tmp_path / "first"
        again = tmp_path / "again"
        run([*BENCH_ARGS, "--out", first])
        assert run(["synth-bench", "--config", first / "config.json", "--out", again]) == 0
        assert (again / "results.csv").read_bytes() == (first / "results.csv").read_bytes()

    def test_k_sweep_rows(self, tmp_path):
        code = run([
            "synth-bench", "--settings", "linear", "--sigmas", "0.2",
            "--metrics", "ccf-auc/pearson", "--algos", "hermitian-rw",
            "--reps", "2", "--T", "60", "--p", "20", "--k-sweep", "2", "3",
            "--no-plots", "--out", tmp_path,
        ])
        assert code == 0
        lines = (tmp_path / "results.csv").read_text().splitlines()
        assert len(lines) == 5
        assert {line.split(",")[4] for line in lines[1:]} == {"2", "3"}

    def test_plots_written(self, tmp_path):
        code = run([
            "synth-bench", "--settings", "linear", "--sigmas", "0.2",
            "--metrics", "ccf-auc/pearson", "--algos", "hermitian-rw",
            "--reps", "1", "--T", "60", "--p", "20", "--out", tmp_path,
        ])
        assert code == 0
        for name in ("accuracy_linear.png", "ari_linear.png"):
            assert (tmp_path / name).stat().st_size > 0

    def test_bad_metric_label_is_usage_error(self, tmp_path):
        code = run([
            "synth-bench", "--metrics", "signature/pearson", "--sigmas", "0",
            "--no-plots", "--out", tmp_path,
        ])
        assert code == 2

    def test_unknown_algorithm_is_usage_error(self, tmp_path, capsys):
        code = run([
            "synth-bench", "--algos", "louvain", "--sigmas", "0",
            "--no-plots", "--out", tmp_path,
        ])
        assert code == 2
        assert "unknown clustering algorithm" in capsys.readouterr().err


class TestPermtestCommand:
    def test_writes_result_fields(self, data_dir, tmp_path):
        code = run([
            "permtest", "--input", data_dir / "panel.csv",
            "--n-mc", "19", "--seed", "2", "--out", tmp_path,
        ])
        assert code == 0
        payload = json.loads((tmp_path / "permtest.json").read_text())
        assert payload["n_monte_carlo"] == 19
        assert len(payload["null_samples"]) == 19
        assert 0.0 < payload["p_value"] <= 1.0
        assert payload["observed_statistic"] > 0.0

    def test_reruns_are_deterministic(self, data_dir, tmp_path):
        outs = []
        for name in ("one", "two"):
            out = tmp_path / name
            run([
                "permtest", "--input", data_dir / "panel.csv",
                "--n-mc", "19", "--seed", "2", "--out", out,
            ])
            outs.append(out)
        assert (outs[0] / "permtest.json").read_bytes() == (outs[1] / "permtest.json").read_bytes()


BACKTEST_ARGS = [
    "backtest", "--functional", "ccf-auc", "--max-lag", "5",
    "--lookback", "60", "--update-period", "30", "--vol-window", "10",
    "--k", "4", "--seed", "3", "--no-plots",
]


class TestBacktestCommand:
    def test_report_and_daily_returns(self, data_dir, tmp_path):
        code = run([*BACKTEST_ARGS, "--input", data_dir / "trading.csv", "--out", tmp_path])
        assert code == 0
        report = json.loads((tmp_path / "report.json").read_text())
        # 220 rows - 60 lookback - 10 vol warmup
        assert report["n_days"] == 150
        assert report["refit_days"] == list(range(60, 220, 30))
        assert report["market_correlation"] is None
        assert np.isfinite(report["sharpe_annualized"])
        lines = (tmp_path / "daily_returns.csv").read_text().splitlines()
        assert lines[0] == "timestamp,daily_return,cumulative_return"
        assert len(lines) == 151

    def test_benchmark_column_held_out(self, data_dir, tmp_path):
        code = run([
            *BACKTEST_ARGS, "--input", data_dir / "trading.csv",
            "--benchmark-column", "s001", "--out", tmp_path,
        ])
        assert code == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["market_correlation"] is not None

    def test_unknown_benchmark_column_is_usage_error(self, data_dir, tmp_path):
        code = run([
            *BACKTEST_ARGS, "--input", data_dir / "trading.csv",
            "--benchmark-column", "spx", "--out", tmp_path,
        ])
        assert code == 2

    def test_ablation_reuses_true_path(self, data_dir, tmp_path):
        code = run([
            *BACKTEST_ARGS, "--input", data_dir / "trading.csv",
            "--ablate-permuted-clusters", "--n-mc", "5", "--out", tmp_path,
        ])
        assert code == 0
        report = json.loads((tmp_path / "report.json").read_text())
        ablation = json.loads((tmp_path / "ablation.json").read_text())
        assert ablation["true_sharpe"] == report["sharpe_annualized"]
        assert ablation["n_replicates"] == 5
        assert len(ablation["null_sharpes"]) == 5

    def test_snapshot_rerun_is_byte_identical(self, data_dir, tmp_path):
        first = tmp_path / "first"
        again = tmp_path / "again"
        run([*BACKTEST_ARGS, "--input", data_dir / "trading.csv", "--out", first])
        assert run(["backtest", "--config", first / "config.json", "--out", again]) == 0
        for name in ("report.json", "daily_returns.csv"):
            assert (again / name).read_bytes() == (first / name).read_bytes()

    def test_insufficient_history_is_runtime_error(self, data_dir, tmp_path):
        code = run([
            "backtest", "--input", data_dir / "panel.csv", "--lookback", "500",
            "--k", "4", "--no-plots", "--out", tmp_path,
        ])
        assert code == 1


class TestEvalCommand:
    def test_grades_matrix_and_clustering(self, data_dir, tmp_path):
        cl_dir = tmp_path / "cl"
        run(["cluster", "--matrix", data_dir / "matrix.csv", "--k", "4", "--out", cl_dir])
        out = tmp_path / "eval"
        code = run([
            "eval", "--truth", data_dir / "truth.json",
            "--matrix", data_dir / "matrix.csv",
            "--clustering", cl_dir / "clustering.json", "--out", out,
        ])
        assert code == 0
        payload = json.loads((out / "eval.json").read_text())
        assert payload["n_series"] == 12
        assert payload["edge_accuracy"] == 1.0
        assert payload["ari"] == 1.0
        assert len(payload["jaccard"]) == 4

    def test_requires_something_to_grade(self, data_dir, tmp_path):
        assert run(["eval", "--truth", data_dir / "truth.json", "--out", tmp_path]) == 2

    def test_mismatched_ids_rejected(self, data_dir, tmp_path):
        spec = SyntheticSpec(
            Setting.LINEAR, T=160, p=12, sigma=0.0,
            lag_assignment=tuple(i // 3 for i in range(12)), seed=5,
        )
        _, truth = generate(spec)
        other = tmp_path / "other_truth.json"
        save_truth(truth, tuple(f"x{i:02d}" for i in range(12)), other)
        code = run([
            "eval", "--truth", other, "--matrix", data_dir / "matrix.csv", "--out", tmp_path,
        ])
        assert code == 1

    def test_clustering_without_labels_mapping(self, data_dir, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"k": 4}))
        code = run([
            "eval", "--truth", data_dir / "truth.json", "--clustering", bad, "--out", tmp_path,
        ])
        assert code == 1
        assert "labels" in capsys.readouterr().err

    def test_missing_truth_file(self, tmp_path):
        code = run([
            "eval", "--truth", tmp_path / "nope.json", "--matrix", tmp_path / "m.csv",
            "--out", tmp_path,
        ])
        assert code == 1
