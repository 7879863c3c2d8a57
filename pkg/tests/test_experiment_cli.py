import subprocess
import sys

import numpy as np
import pytest

from misslin.cli import main
from misslin.experiment import (
    BUILTIN_CONFIGS,
    ConfigError,
    ExperimentConfig,
    GridSpec,
    SeparabilityGrid,
    apply_overrides,
    covariance_matrix,
    load_config,
    parse_config_text,
    parse_grid_text,
    results_to_csv,
    rows_to_csv,
    run_bounds_sweep,
    run_experiment,
    run_separability_sweep,
)

SMALL_OVERRIDES = {
    "replicates": "2",
    "n_grid": "80,200",
    "n_test": "4000",
    "classifiers": "bayes-pbp-lda,lda-mcar,pbp-lda",
    "seed": "5",
}


def small_config(**extra):
    cfg = load_config("fig1-lda-mcar")
    return apply_overrides(cfg, {**SMALL_OVERRIDES, **extra})


class TestConfigParsing:
    def test_text_roundtrip(self):
        text = """
        # comment
        scenario = lda-mcar
        d = 4
        eta = 0.3
        n_grid = 100, 300
        classifiers = lda-mcar, pbp-lda
        seed = 9
        """
        cfg = parse_config_text(text)
        assert cfg.scenario == "lda-mcar"
        assert cfg.d == 4
        assert cfg.n_grid == (100, 300)
        assert cfg.classifiers == ("lda-mcar", "pbp-lda")

    def test_line_context_in_errors(self):
        with pytest.raises(ConfigError, match=":3"):
            parse_config_text("scenario = lda-mcar\n\nbogus_key = 1\n")

    def test_unknown_classifier_rejected(self):
        with pytest.raises(ConfigError, match="classifier"):
            parse_config_text("scenario = lda-mcar\nclassifiers = nope\n")

    def test_descending_grid_rejected(self):
        with pytest.raises(ConfigError, match="ascending"):
            parse_config_text("scenario = lda-mcar\nn_grid = 300,100\n")

    def test_scenario_alias(self):
        cfg = parse_config_text("scenario = lda-mnar\n")
        assert cfg.scenario == "lda-mnar-selfmask"

    def test_bayes_oracle_restricted_to_lda(self):
        with pytest.raises(ConfigError):
            parse_config_text("scenario = logistic-mcar\nclassifiers = bayes-pbp-lda\n")

    def test_covariance_specs(self):
        assert covariance_matrix("identity", 3).dim == 3
        toe = covariance_matrix("toeplitz(0.6)", 3)
        assert toe.entries[0, 2] == pytest.approx(0.36)
        with pytest.raises(ConfigError):
            covariance_matrix("toeplitz(1.5)", 3)
        with pytest.raises(ConfigError):
            covariance_matrix("wishart", 3)

    def test_builtin_configs_valid(self):
        for name in BUILTIN_CONFIGS:
            assert load_config(name).d == 5

    def test_preset_key_validated(self):
        cfg = parse_config_text("scenario = lda-mcar\npreset = fig1-lda\n")
        assert cfg.preset == "fig1-lda"
        with pytest.raises(ConfigError, match="preset"):
            parse_config_text("scenario = lda-mcar\npreset = fig1-logistic\n")
        with pytest.raises(ConfigError, match="preset"):
            parse_config_text("scenario = lda-mcar\npreset = nope\n")


class TestRunExperiment:
    def test_bayes_self_test_has_no_excess(self):
        cfg = small_config(classifiers="bayes-pbp-lda", n_test="20000")
        rows = run_experiment(cfg)
        for row in rows:
            assert row.error == ""
            assert abs(row.excess) <= 3 * row.ci_halfwidth

    def test_every_cell_present(self):
        cfg = small_config()
        rows = run_experiment(cfg)
        keys = {(r.classifier, r.n_train, r.replicate) for r in rows}
        assert len(rows) == len(keys) == 3 * 2 * 2

    def test_failures_recorded_not_dropped(self):
        # opt-imp-lda needs the generating LDA model, absent in a logistic run
        cfg = parse_config_text(
            "scenario = logistic-mcar\nclassifiers = opt-imp-lda\n"
            "n_grid = 60\nreplicates = 1\nn_test = 500\nbayes_n_test = 500\nseed = 3\n"
        )
        rows = run_experiment(cfg)
        assert len(rows) == 1
        assert rows[0].error.startswith("ValueError")
        assert rows[0].risk is None

    def test_reproducibility_byte_identical(self):
        cfg = small_config()
        a = results_to_csv(run_experiment(cfg), include_timing=False)
        b = results_to_csv(run_experiment(cfg), include_timing=False)
        assert a == b

    def test_timing_column_toggle(self):
        cfg = small_config(classifiers="bayes-pbp-lda", n_grid="80", replicates="1",
                           n_test="500")
        rows = run_experiment(cfg)
        with_timing = results_to_csv(rows, include_timing=True)
        without = results_to_csv(rows, include_timing=False)
        assert "wall_time_ms" in with_timing.splitlines()[0]
        assert "wall_time_ms" not in without.splitlines()[0]

    def test_logistic_scenario_runs_and_has_positive_excess(self):
        cfg = parse_config_text(
            "scenario = logistic-mcar\nclassifiers = 0imp-logreg\n"
            "n_grid = 400\nreplicates = 1\nn_test = 4000\nbayes_n_test = 4000\nseed = 2\n"
        )
        rows = run_experiment(cfg)
        assert rows[0].error == ""
        assert rows[0].excess > -3 * rows[0].ci_halfwidth

    def test_logistic_scenario_uniformly_poor_at_large_n(self):
        # every method stalls near the 0.3 risk level at n = 1e4 in the
        # logistic scenario; none beats the numeric Bayes reference beyond
        # Monte Carlo noise (the spec's ">= 0.1 excess" reading is
        # unattainable under the r - bayes_mis definition: see the ledger)
        cfg = parse_config_text(
            "scenario = logistic-mcar\nn_grid = 10000\nreplicates = 2\n"
            "n_test = 20000\nbayes_n_test = 20000\nseed = 20240\n"
        )
        rows = run_experiment(cfg)
        assert len(rows) == 20
        for row in rows:
            assert row.error == ""
            assert row.risk >= 0.25
            assert row.excess >= -3 * row.ci_halfwidth

    def test_mnar_scenario_runs(self):
        cfg = parse_config_text(
            "scenario = lda-mnar\nclassifiers = lda-mcar,0imp-logreg\n"
            "n_grid = 300\nreplicates = 1\nn_test = 3000\nbayes_n_test = 3000\nseed = 4\n"
        )
        rows = run_experiment(cfg)
        assert all(r.error == "" for r in rows)
        assert all(r.bayes_risk_mis is not None for r in rows)


class TestSweeps:
    def test_bias_sweep_all_pass(self):
        grid = GridSpec(kind="bias", d=(2, 3), eta=(0.3, 0.5), mu=(1.0,), sigma=("identity",))
        rows, columns = run_bounds_sweep(grid)
        assert len(rows) == 4
        assert all(r["pass"] == "true" for r in rows)
        assert all(r["slack"] >= 0 for r in rows)
        assert columns[0] == "kind"

    def test_bias_sweep_zero_point(self):
        grid = GridSpec(kind="bias", d=(3,), eta=(0.0,), mu=(1.0,), sigma=("identity",))
        rows, _ = run_bounds_sweep(grid)
        assert rows[0]["exact_bias"] == pytest.approx(0.0, abs=1e-14)
        assert rows[0]["bound"] == pytest.approx(0.0, abs=1e-14)
        assert rows[0]["slack"] == pytest.approx(0.0, abs=1e-14)

    def test_estimation_sweep_small(self):
        grid = GridSpec(
            kind="estimation", d=(3,), eta=(0.5,), mu=(1.0,), sigma=("identity",),
            n=(100, 400), replicates=5, n_test=5000, seed=1,
        )
        rows, columns = run_bounds_sweep(grid)
        assert len(rows) == 2
        assert all(r["pass"] == "true" for r in rows)
        assert "empirical_excess" in columns

    def test_grid_parse_errors(self):
        with pytest.raises(ConfigError):
            parse_grid_text("kind = wavelet\n")
        with pytest.raises(ConfigError, match=":2"):
            parse_grid_text("kind = bias\nd = two\n")

    def test_separability_sweep(self):
        rows, columns = run_separability_sweep(SeparabilityGrid(count=4, reps=20_000, seed=2))
        assert len(rows) == 4
        assert all(r["lower_ok"] == "true" for r in rows)
        assert set(columns) >= {"alpha", "sqrt_alpha", "estimate", "ci_halfwidth"}


class TestCli:
    def test_simulate_writes_csv(self, tmp_path):
        out = tmp_path / "r.csv"
        code = main(
            [
                "simulate", "--config", "fig1-lda-mcar", "--no-timing",
                "--out", str(out), "--seed", "5", "--preset", "fig1-lda",
                "--set", "replicates=1", "--set", "n_grid=80",
                "--set", "n_test=500", "--set", "classifiers=bayes-pbp-lda",
            ]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "scenario,classifier,n_train,replicate,risk,excess,ci_halfwidth,bayes_risk_mis,error"
        assert len(lines) == 2

    def test_cli_determinism(self, tmp_path):
        args = [
            "simulate", "--config", "fig1-lda-mcar", "--no-timing", "--seed", "9",
            "--set", "replicates=2", "--set", "n_grid=80,150", "--set", "n_test=400",
            "--set", "classifiers=lda-mcar,pbp-logreg",
        ]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_config_error_exit_code(self, capsys):
        assert main(["simulate", "--config", "no-such-config-anywhere"]) == 2
        assert "config error" in capsys.readouterr().err

    def test_bounds_strict_ok(self, tmp_path):
        out = tmp_path / "b.csv"
        code = main(
            ["bounds", "--grid", str(_write_grid(tmp_path)), "--out", str(out), "--strict"]
        )
        assert code == 0
        assert out.read_text().splitlines()[0].startswith("kind,")

    def test_bounds_builtin_grid_full_pass(self, tmp_path):
        out = tmp_path / "bias.csv"
        assert main(["bounds", "--grid", "bias-default", "--out", str(out), "--strict"]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 1 + 7 * 2 * 4 * 4  # header + full default grid
        assert all(line.endswith(",true") for line in lines[1:])

    def test_separability_runs(self, tmp_path):
        grid = tmp_path / "sep.grid"
        grid.write_text("count = 2\nreps = 5000\nseed = 3\n")
        out = tmp_path / "sep.csv"
        assert main(["separability", "--grid", str(grid), "--out", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 3

    def test_presets_list(self, capsys):
        assert main(["presets", "list"]) == 0
        text = capsys.readouterr().out
        assert "fig1-lda" in text and "fig1-lda-mcar" in text

    def test_entry_point_installed(self):
        proc = subprocess.run(
            [sys.executable, "-m", "misslin.cli", "presets", "list"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "fig1-logistic" in proc.stdout


def _write_grid(tmp_path):
    path = tmp_path / "grid.txt"
    path.write_text("kind = bias\nd = 2,3\neta = 0.5\nmu = 1\nsigma = identity\n")
    return path


class TestResultCsv:
    def test_float_format_17_digits(self):
        rows = [{"a": 1.0 / 3.0, "b": "x"}]
        text = rows_to_csv(rows, ("a", "b"))
        assert text.splitlines()[1] == "0.33333333333333331,x"

    def test_defaults_match_documented_protocol(self):
        cfg = ExperimentConfig(scenario="lda-mcar").validate()
        assert cfg.d == 5
        assert cfg.eta == 0.5
        assert cfg.n_grid == (100, 300, 1000, 3000, 10000)
        assert cfg.n_test == 100_000
        assert cfg.replicates == 30
        assert len(cfg.classifiers) == 10
