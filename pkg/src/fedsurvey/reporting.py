"""Result files: tidy scores, summary tables, hypothesis tests, traffic, heterogeneity.

Every file starts with a ``# config_hash=... seed=...`` line so a result can
always be traced to the configuration that produced it.
"""
from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Schema, SiteTable
from .errors import StatsError
from .evaluation import CENTRALIZED, FEDERATED, LOCAL_AVERAGE, POLARITY, ExperimentResult, relative_improvement
from .stats import HypothesisReport, SampleTriple, cohens_d, decide_and_test, scheffe_posthoc

MODEL_LABELS = {
    "linear": "Linear Regression",
    "rf_regression": "Random Forest Regression",
    "rf_classification": "Random Forest Classification",
}
METRIC_LABELS = {"r_squared": "r-square", "rmse": "RMSE", "accuracy": "accuracy", "auroc": "AUROC"}
COMPARISON_LABELS = (
    "If Centralized better than Local (P-value)",
    "If Federated better than Local (P-value)",
    "If Centralized better than Federated (P-value)",
)
SCENARIO_LABELS = {LOCAL_AVERAGE: "Average of Locals", CENTRALIZED: "Centralized", FEDERATED: "Federated"}


def header(config_hash: str, seed: int) -> str:
    return f"# config_hash={config_hash} seed={seed}\n"


def fmt_value(value: float) -> str:
    """Shortest repr that round-trips, so reruns print identical bytes."""
    return repr(float(value))


def stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return "n.s."


def mark_p(p: float) -> str:
    """``0.00092 ***`` or ``0.48 (n.s.)``."""
    mark = stars(p)
    return f"{p:.2g} ({mark})" if mark == "n.s." else f"{p:.2g} {mark}"


def _csv_text(rows: Sequence[Sequence], columns: Sequence[str], prefix: str = "") -> str:
    buf = io.StringIO()
    buf.write(prefix)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buf.getvalue()


# -- scores ------------------------------------------------------------------

RESULT_COLUMNS = ("fraction", "algorithm", "fold", "scenario", "metric", "subset", "value")


def results_rows(result: ExperimentResult) -> list[list]:
    return [[fmt_value(result.fraction), r.algorithm, r.fold, r.scenario, r.metric, r.subset, fmt_value(r.value)]
            for r in result.records]


def results_csv(results: Sequence[ExperimentResult], config_hash: str, seed: int) -> str:
    rows = [row for res in results for row in results_rows(res)]
    return _csv_text(rows, RESULT_COLUMNS, header(config_hash, seed))


@dataclass(frozen=True)
class Comparison:
    algorithm: str
    metric: str
    local: float
    centralized: float
    federated: float
    improvement: float | None
    reports: tuple[HypothesisReport, ...]


def compare(result: ExperimentResult) -> list[Comparison]:
    """Mean scores and the three gated tests per (algorithm, metric)."""
    out = []
    for algorithm in result.algorithms:
        for metric in result.metrics(algorithm):
            values = {s: result.fold_values(algorithm, s, metric) for s in (LOCAL_AVERAGE, CENTRALIZED, FEDERATED)}
            polarity = POLARITY[metric]
            means = {s: float(v.mean()) for s, v in values.items()}
            try:
                improvement = relative_improvement(means[FEDERATED], means[LOCAL_AVERAGE], polarity)
            except ZeroDivisionError:
                improvement = None
            reports: tuple[HypothesisReport, ...] = ()
            if len(values[LOCAL_AVERAGE]) >= 3:
                try:
                    triple = SampleTriple(values[LOCAL_AVERAGE], values[CENTRALIZED], values[FEDERATED])
                    reports = tuple(decide_and_test(triple, polarity))
                except StatsError:
                    reports = ()
            out.append(Comparison(algorithm, metric, means[LOCAL_AVERAGE], means[CENTRALIZED], means[FEDERATED],
                                  improvement, reports))
    return out


HYPOTHESIS_COLUMNS = ("fraction", "model", "metric") + COMPARISON_LABELS + (
    "test_C_vs_L", "test_F_vs_L", "test_C_vs_F", "p_C_vs_L", "p_F_vs_L", "p_C_vs_F")


def hypotheses_csv(results: Sequence[ExperimentResult], config_hash: str, seed: int) -> str:
    rows = []
    for res in results:
        for c in compare(res):
            if not c.reports:
                continue
            rows.append([fmt_value(res.fraction), MODEL_LABELS[c.algorithm], METRIC_LABELS[c.metric]]
                        + [mark_p(r.one_sided_p) for r in c.reports]
                        + [r.test_used for r in c.reports]
                        + [fmt_value(r.one_sided_p) for r in c.reports])
    return _csv_text(rows, HYPOTHESIS_COLUMNS, header(config_hash, seed))


def _md_table(columns: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(columns) + " |", "|" + "|".join("---" for _ in columns) + "|"]
    lines += ["| " + " | ".join(str(v) for v in row) + " |" for row in rows]
    return "\n".join(lines) + "\n"


def _fraction_title(fraction: float) -> str:
    return "Full training data" if fraction >= 1.0 else f"Models trained on {fraction:.0%} of training data"


def summary_md(results: Sequence[ExperimentResult], cfg_yaml: str, config_hash: str, seed: int) -> str:
    parts = [f"<!-- config_hash={config_hash} seed={seed} -->\n", "# Experiment summary\n"]
    for res in results:
        comps = compare(res)
        parts.append(f"\n## {_fraction_title(res.fraction)}\n\n")
        parts.append(_md_table(
            ("Model", "Metric", "Average of Locals", "Centralized", "Federated",
             "Relative Improvement of federated over local"),
            [(MODEL_LABELS[c.algorithm], METRIC_LABELS[c.metric], f"{c.local:.4f}", f"{c.centralized:.4f}",
              f"{c.federated:.4f}", "n/a" if c.improvement is None else f"{c.improvement:.2f}%") for c in comps]))
        tested = [c for c in comps if c.reports]
        if tested:
            parts.append("\nOne-sided p-values (test used in brackets):\n\n")
            parts.append(_md_table(
                ("Model", "Metric") + COMPARISON_LABELS,
                [(MODEL_LABELS[c.algorithm], METRIC_LABELS[c.metric])
                 + tuple(f"{mark_p(r.one_sided_p)} [{r.test_used}]" for r in c.reports) for c in tested]))
            parts.append("\nn.s. : statistically not significant; *** p < 0.001, ** p < 0.01, * p < 0.05.\n")
    parts.append("\n## Resolved configuration\n\n```yaml\n" + cfg_yaml + "```\n")
    return "".join(parts)


# -- traffic -----------------------------------------------------------------

ROUNDLOG_COLUMNS = ("fraction", "algorithm", "fold", "round", "message_type", "sender", "messages", "bytes")


def roundlog_csv(results: Sequence[ExperimentResult], config_hash: str, seed: int) -> str:
    """Traffic per (round, message type, sender); one line sums that group's frames."""
    rows = []
    for res in results:
        for (algorithm, fold), log in sorted(res.round_logs.items()):
            groups: dict[tuple, list[int]] = defaultdict(lambda: [0, 0])
            order = []
            for e in log.entries:
                key = (e.round, e.message_type, e.sender)
                if key not in groups:
                    order.append(key)
                groups[key][0] += 1
                groups[key][1] += e.bytes
            for key in order:
                rows.append([fmt_value(res.fraction), algorithm, fold, *key, *groups[key]])
    return _csv_text(rows, ROUNDLOG_COLUMNS, header(config_hash, seed))


# -- subsampling plot data ---------------------------------------------------

PLOT_COLUMNS = ("fraction", "algorithm", "scenario", "metric", "mean", "sd", "folds")


def subsample_plot_csv(results: Sequence[ExperimentResult], config_hash: str, seed: int) -> str:
    """Mean and SD across folds per (fraction, algorithm, scenario, metric)."""
    rows = []
    for res in sorted(results, key=lambda r: -r.fraction):
        for algorithm in res.algorithms:
            scenarios = [LOCAL_AVERAGE, CENTRALIZED, FEDERATED] + [f"local:{s}" for s in res.sites]
            for scenario in scenarios:
                for metric in res.metrics(algorithm):
                    v = res.fold_values(algorithm, scenario, metric)
                    sd = float(v.std(ddof=1)) if v.shape[0] > 1 else 0.0
                    rows.append([fmt_value(res.fraction), algorithm, scenario, metric, fmt_value(v.mean()),
                                 fmt_value(sd), v.shape[0]])
    return _csv_text(rows, PLOT_COLUMNS, header(config_hash, seed))


# -- heterogeneity -----------------------------------------------------------

@dataclass(frozen=True)
class HeterogeneityReport:
    variables: list[str]
    pairs: list[str]
    scheffe: np.ndarray      # variables x pairs
    cohens_d: np.ndarray     # variables x pairs


def heterogeneity(tables: Sequence[SiteTable], schema: Schema) -> HeterogeneityReport:
    """Pairwise Scheffé p and Cohen's d between sites, per variable and for the target.

    Pair ``XvsY`` holds d = (mean_X - mean_Y) / pooled SD. A variable that is
    constant within both sites of a pair gets NaN for d.
    """
    if len(tables) < 2:
        raise ValueError("heterogeneity needs at least two sites")
    ids = [t.site_id for t in tables]
    pairs = [(i, j) for i in range(len(ids)) for j in range(i + 1, len(ids))]
    columns = [(name, lambda t, f=f: t.X[:, f]) for f, name in enumerate(schema.feature_names)]
    columns.append((schema.target.name, lambda t: t.y))
    p_rows, d_rows = [], []
    for _, column in columns:
        groups = [column(t) for t in tables]
        p = scheffe_posthoc(groups)
        p_rows.append([p[i, j] for i, j in pairs])
        d_row = []
        for i, j in pairs:
            try:
                d_row.append(cohens_d(groups[i], groups[j]))
            except StatsError:
                d_row.append(float("nan"))
        d_rows.append(d_row)
    return HeterogeneityReport([c[0] for c in columns], [f"{ids[i]}vs{ids[j]}" for i, j in pairs],
                               np.array(p_rows, dtype=float), np.array(d_rows, dtype=float))


def heterogeneity_csv(report: HeterogeneityReport, which: str, config_hash: str, seed: int) -> str:
    matrix = report.scheffe if which == "scheffe" else report.cohens_d
    rows = [[name] + [fmt_value(v) for v in row] for name, row in zip(report.variables, matrix)]
    return _csv_text(rows, ["variable"] + report.pairs, header(config_hash, seed))


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")
    return path
