import subprocess
import sys
from pathlib import Path

import pytest

from plot_results import PlotSpec, SchemaError, build_figure, read_results, render
from plot_results.cli import main

HEADER = "scenario,classifier,n_train,replicate,risk,excess,ci_halfwidth,bayes_risk_mis,error"


def write_csv(path: Path, classifiers=("lda-mcar",), n_values=(100, 300, 1000), reps=3):
    lines = [HEADER]
    for rep in range(reps):
        for n in n_values:
            for i, cid in enumerate(classifiers):
                risk = 0.2 + 0.05 * i + 1.0 / n + 0.001 * rep
                lines.append(f"lda-mcar,{cid},{n},{rep},{risk},{risk - 0.2},0.002,0.2,")
    path.write_text("\n".join(lines) + "\n")
    return path


class TestRender:
    def test_writes_nonempty_image(self, tmp_path):
        csv = write_csv(tmp_path / "r.csv")
        out = tmp_path / "fig.png"
        render(PlotSpec(str(csv), str(out)))
        assert out.exists() and out.stat().st_size > 1000

    def test_one_legend_entry_per_classifier_plus_bayes(self, tmp_path):
        cids = ("lda-mcar", "pbp-lda", "0imp-logreg")
        csv = write_csv(tmp_path / "r.csv", classifiers=cids)
        fig = build_figure(PlotSpec(str(csv), str(tmp_path / "f.png"), "excess"))
        labels = [t.get_text() for t in fig.legends[0].get_texts()] if fig.legends else [
            t.get_text() for t in fig.axes[0].get_legend().get_texts()
        ]
        assert sorted(labels) == sorted(cids + ("bayes",))

    def test_flat_curve_for_bayes_self_test(self, tmp_path):
        csv = tmp_path / "r.csv"
        lines = [HEADER]
        for rep in range(3):
            for n in (100, 1000):
                lines.append(f"lda-mcar,bayes-pbp-lda,{n},{rep},0.2001,0.0001,0.001,0.2,")
        csv.write_text("\n".join(lines) + "\n")
        fig = build_figure(PlotSpec(str(csv), str(tmp_path / "f.png"), "excess"))
        line = fig.axes[0].get_lines()[0]
        assert max(abs(v) for v in line.get_ydata()) <= 0.001

    def test_schema_mismatch_is_diagnosed(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n")
        with pytest.raises(SchemaError, match="missing required columns"):
            read_results(str(bad))

    def test_error_rows_excluded(self, tmp_path):
        csv = tmp_path / "r.csv"
        lines = [HEADER]
        lines.append("lda-mcar,pbp-lda,100,0,0.3,0.1,0.002,0.2,")
        lines.append("lda-mcar,pbp-lda,100,1,,,,,ValueError: boom")
        csv.write_text("\n".join(lines) + "\n")
        fig = build_figure(PlotSpec(str(csv), str(tmp_path / "f.png"), "excess"))
        assert fig.axes[0].get_lines()


class TestCli:
    def test_exit_codes(self, tmp_path):
        csv = write_csv(tmp_path / "r.csv")
        out = tmp_path / "fig.png"
        assert main(["--csv", str(csv), "--out", str(out), "--y", "excess"]) == 0
        bad = tmp_path / "bad.csv"
        bad.write_text("x,y\n1,2\n")
        assert main(["--csv", str(bad), "--out", str(out)]) == 2

    def test_byte_identical_across_invocations(self, tmp_path):
        csv = write_csv(tmp_path / "r.csv")
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        assert main(["--csv", str(csv), "--out", str(a)]) == 0
        assert main(["--csv", str(csv), "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_risk_mode_draws_bayes_line(self, tmp_path):
        csv = write_csv(tmp_path / "r.csv")
        fig = build_figure(PlotSpec(str(csv), str(tmp_path / "f.png"), "risk"))
        labels = [t.get_text() for t in fig.axes[0].get_legend().get_texts()]
        assert "bayes" in labels


@pytest.mark.slow
class TestAcceptanceSecondary:
    def test_fig1_csv_end_to_end(self, tmp_path):
        """[SECONDARY] render a real (size-reduced) fig1-lda-mcar CSV.

        One legend entry per configured classifier plus the Bayes reference,
        exit 0, byte-identical output across two invocations. The CSV comes
        from the real `misslin` CLI, the package's only interface.
        """
        csv = tmp_path / "fig1.csv"
        sim = subprocess.run(
            [
                sys.executable, "-m", "misslin.cli", "simulate",
                "--config", "fig1-lda-mcar", "--no-timing", "--seed", "20240",
                "--set", "replicates=2", "--set", "n_grid=100,300,1000",
                "--set", "n_test=2000", "--out", str(csv),
            ],
            capture_output=True, text=True,
        )
        assert sim.returncode == 0, sim.stderr
        configured = [
            "pbp-logreg", "0imp-logreg", "ice-logreg",
            "pbp-perceptron", "0imp-perceptron", "ice-perceptron",
            "pbp-lda", "0imp-lda", "ice-lda", "lda-mcar",
        ]
        out_a, out_b = tmp_path / "a.png", tmp_path / "b.png"
        for out in (out_a, out_b):
            proc = subprocess.run(
                ["plot_results", "--csv", str(csv), "--out", str(out), "--y", "excess",
                 "--classifiers", ",".join(configured)],
                capture_output=True, text=True,
            )
            assert proc.returncode == 0, proc.stderr
        assert out_a.read_bytes() == out_b.read_bytes()
        fig = build_figure(
            PlotSpec(str(csv), str(tmp_path / "c.png"), "excess", None, tuple(configured))
        )
        labels = [t.get_text() for t in fig.axes[0].get_legend().get_texts()]
        assert sorted(labels) == sorted(configured + ["bayes"])
        print(
            "[PASS] secondary: rendered fig1-lda-mcar CSV with "
            f"{len(labels)} legend entries, byte-identical across invocations"
        )
