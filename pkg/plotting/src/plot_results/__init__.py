"""Turn misslin result CSVs into risk/excess-versus-n figures.

Reads the frozen result schema (scenario, classifier, n_train, replicate,
risk, excess, ci_halfwidth, bayes_risk_mis, error[, wall_time_ms]) and draws
one curve per classifier: the mean over replicates with a shaded one-
standard-error band on a log-scaled sample-size axis, plus a dotted Bayes
reference line. Output is a pure function of the CSV bytes and the spec; no
timestamps or randomness are embedded.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

REQUIRED_COLUMNS = (
    "scenario",
    "classifier",
    "n_train",
    "replicate",
    "risk",
    "excess",
    "bayes_risk_mis",
    "error",
)


class SchemaError(ValueError):
    """The CSV does not match the frozen result schema."""


@dataclass(frozen=True)
class PlotSpec:
    csv_path: str
    out_path: str
    y_mode: str = "excess"  # risk | excess
    scenario: str | None = None
    classifiers: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.y_mode not in ("risk", "excess"):
            raise SchemaError(f"y_mode must be 'risk' or 'excess', got {self.y_mode!r}")


def read_results(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise SchemaError(
                f"missing required columns {missing}; found {header}"
            )
        return list(reader)


def _select(rows: list[dict], spec: PlotSpec) -> list[dict]:
    out = []
    for row in rows:
        if row.get("error"):
            continue  # failed cells carry no risk value
        if spec.scenario and row["scenario"] != spec.scenario:
            continue
        if spec.classifiers and row["classifier"] not in spec.classifiers:
            continue
        out.append(row)
    if not out:
        raise SchemaError("no rows left after filtering; check scenario/classifier filters")
    return out


def aggregate(rows: list[dict], y_mode: str):
    """Per classifier: (n values, mean, standard error) plus the Bayes line."""
    per_classifier: dict[str, dict[int, list[float]]] = {}
    bayes: dict[int, list[float]] = {}
    for row in rows:
        n = int(row["n_train"])
        per_classifier.setdefault(row["classifier"], {}).setdefault(n, []).append(
            float(row[y_mode])
        )
        bayes.setdefault(n, []).append(float(row["bayes_risk_mis"]))
    curves = {}
    for cid, per_n in per_classifier.items():
        ns = sorted(per_n)
        means = np.array([np.mean(per_n[n]) for n in ns])
        ses = np.array(
            [
                np.std(per_n[n], ddof=1) / math.sqrt(len(per_n[n])) if len(per_n[n]) > 1 else 0.0
                for n in ns
            ]
        )
        curves[cid] = (np.array(ns), means, ses)
    bayes_ns = sorted(bayes)
    bayes_means = np.array([np.mean(bayes[n]) for n in bayes_ns])
    return curves, (np.array(bayes_ns), bayes_means)


def build_figure(spec: PlotSpec):
    rows = _select(read_results(spec.csv_path), spec)
    curves, (bayes_ns, bayes_means) = aggregate(rows, spec.y_mode)
    fig, ax = plt.subplots(figsize=(7.0, 4.5), dpi=120)
    order = spec.classifiers or tuple(sorted(curves))
    for cid in order:
        if cid not in curves:
            continue
        ns, means, ses = curves[cid]
        ax.plot(ns, means, marker="o", markersize=3, linewidth=1.2, label=cid)
        ax.fill_between(ns, means - ses, means + ses, alpha=0.15)
    if spec.y_mode == "excess":
        ax.axhline(0.0, linestyle=":", color="black", linewidth=1.2, label="bayes")
        ax.set_ylabel("excess risk")
    else:
        ax.plot(bayes_ns, bayes_means, linestyle=":", color="black", linewidth=1.2, label="bayes")
        ax.set_ylabel("misclassification risk")
    ax.set_xscale("log")
    ax.set_xlabel("training sample size n")
    scenarios = sorted({row["scenario"] for row in rows})
    ax.set_title(", ".join(scenarios))
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    return fig


def render(spec: PlotSpec) -> str:
    """Write the figure to spec.out_path and return the path."""
    fig = build_figure(spec)
    try:
        fig.savefig(spec.out_path, metadata={"Software": "plot_results"})
    finally:
        plt.close(fig)
    return spec.out_path
