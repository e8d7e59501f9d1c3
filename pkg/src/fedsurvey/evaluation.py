"""Metrics and the local / centralized / federated cross-validation experiment."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .dataset import FoldPlan, Schema, SiteTable, balanced_test_subsets, subsample_training, supersample_balance
from .errors import DimensionMismatch, OneClassOnly, ZeroVariance
from .federation import (
    FedConfig,
    RoundLog,
    run_federated_linear,
    run_federated_rf_classification,
    run_federated_rf_regression,
)
from .models import TrainConfig, fit_forest, fit_ols, predict, predict_proba
from .rng import stream_key

log = logging.getLogger(__name__)

ALGORITHMS = {
    "linear": ("regression", "fed_linear"),
    "rf_regression": ("regression", "fed_rf_regression"),
    "rf_classification": ("classification", "fed_rf_classification"),
}
METRICS = {
    "regression": ("r_squared", "rmse"),
    "classification": ("accuracy", "auroc"),
}
POLARITY = {"r_squared": "higher_better", "rmse": "lower_better",
            "accuracy": "higher_better", "auroc": "higher_better"}

LOCAL_AVERAGE = "local_average"
CENTRALIZED = "centralized"
FEDERATED = "federated"
SUBSET_MEAN = "mean"


def _pair(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise DimensionMismatch(f"shapes {y_true.shape} and {y_pred.shape} differ")
    return y_true, y_pred


def r_squared(y_true, y_pred) -> float:
    y_true, y_pred = _pair(y_true, y_pred)
    if y_true.shape[0] < 2:
        raise ValueError("R-squared needs at least two values")
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0:
        raise ZeroVariance("y_true has zero variance")
    return 1.0 - float(np.sum((y_true - y_pred) ** 2)) / ss_tot


def rmse(y_true, y_pred) -> float:
    y_true, y_pred = _pair(y_true, y_pred)
    if y_true.shape[0] < 1:
        raise ValueError("RMSE needs at least one value")
    return math.sqrt(float(np.mean((y_true - y_pred) ** 2)))


def accuracy(y_true, y_label) -> float:
    y_true, y_label = _pair(y_true, y_label)
    if y_true.shape[0] < 1:
        raise ValueError("accuracy needs at least one value")
    return float(np.mean(y_true == y_label))


def auroc(y_true, score) -> float:
    """Mann-Whitney AUC from mid-ranks: P(pos > neg) + P(tie) / 2."""
    y_true, score = _pair(y_true, score)
    pos = y_true == 1
    n_pos = int(pos.sum())
    n_neg = y_true.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnly()
    ranks = rankdata(score)
    u = float(ranks[pos].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def relative_improvement(fed: float, local: float, polarity: str = "higher_better") -> float:
    """Percent improvement of the federated over the local-average metric."""
    if local == 0:
        raise ZeroDivisionError("local metric is zero")
    if polarity == "higher_better":
        return (fed - local) / abs(local) * 100.0
    if polarity == "lower_better":
        return (local - fed) / abs(local) * 100.0
    raise ValueError(f"unknown polarity {polarity!r}")


def local_scenario(site_id: str) -> str:
    return f"local:{site_id}"


@dataclass(frozen=True)
class Record:
    algorithm: str
    fold: int
    scenario: str
    metric: str
    subset: str
    value: float


@dataclass
class ExperimentResult:
    """Keyed score cells plus the provenance needed to reproduce them."""

    cells: dict[tuple[str, int, str, str, str], float] = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    seed: int = 0
    fraction: float = 1.0
    sites: tuple[str, ...] = ()
    models_trained: int = 0
    round_logs: dict[tuple[str, int], RoundLog] = field(default_factory=dict)
    test_sets: dict[int, bytes] = field(default_factory=dict)

    def add(self, algorithm: str, fold: int, scenario: str, metric: str, value: float, subset: str = "") -> None:
        if not math.isfinite(value):
            raise ValueError(f"non-finite {metric} for {algorithm}/{scenario}/fold {fold}")
        self.cells[(algorithm, fold, scenario, metric, subset)] = float(value)

    @property
    def records(self) -> list[Record]:
        return [Record(*key, value) for key, value in sorted(self.cells.items())]

    @property
    def algorithms(self) -> list[str]:
        return sorted({k[0] for k in self.cells})

    def folds(self, algorithm: str) -> list[int]:
        return sorted({k[1] for k in self.cells if k[0] == algorithm})

    def metrics(self, algorithm: str) -> tuple[str, ...]:
        return METRICS[ALGORITHMS[algorithm][0]]

    def fold_values(self, algorithm: str, scenario: str, metric: str) -> np.ndarray:
        """Per-fold values; classification folds use the mean over test subsets."""
        task = ALGORITHMS[algorithm][0]
        subset = SUBSET_MEAN if task == "classification" else ""
        return np.array([self.cells[(algorithm, f, scenario, metric, subset)] for f in self.folds(algorithm)])

    def mean(self, algorithm: str, scenario: str, metric: str) -> float:
        return float(self.fold_values(algorithm, scenario, metric).mean())


def _concat(tables: Sequence[SiteTable], site_id: str = "pooled") -> SiteTable:
    return SiteTable(site_id, np.vstack([t.X for t in tables]), np.concatenate([t.y for t in tables]))


def _fold_seed(seed: int, *keys) -> int:
    return stream_key(seed, *keys) & 0x7FFF_FFFF_FFFF_FFFF


def run_experiment(data: Sequence[SiteTable], schema: Schema, fold_plan: FoldPlan, algorithms: Sequence[str],
                   fed_config: FedConfig | None = None, seed: int = 0, *,
                   train_config: TrainConfig | None = None, fraction: float = 1.0,
                   threads: int = 1) -> ExperimentResult:
    """Train every scenario per fold and score it on the shared global test set.

    Per fold each site is split into train/test by ``fold_plan``; the global
    test set is the union of site test splits. Local models use one site's
    training rows, the centralized model their concatenation, the federated
    model the protocol for the algorithm. Classification balances every site's
    training rows by supersampling and scores on balanced test subsets.
    With ``fraction < 1`` the training rows are subsampled; tests are not.
    """
    data = list(data)
    if not data:
        raise ValueError("no sites")
    if len({t.X.shape[1] for t in data} | {schema.n_features}) != 1:
        raise DimensionMismatch("sites do not match the schema's feature count")
    train_config = replace(train_config or TrainConfig(), seed=seed)
    fed_config = fed_config or FedConfig()
    result = ExperimentResult(seed=seed, fraction=fraction, sites=tuple(t.site_id for t in data))
    n_sites = len(data)
    for algorithm in algorithms:
        if algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {algorithm!r}")
        task, fed_algorithm = ALGORITHMS[algorithm]
        if task != schema.task:
            raise ValueError(f"algorithm {algorithm!r} needs a {task} schema")
        fcfg = replace(fed_config, algorithm=fed_algorithm, model=train_config, seed=seed)
        for fold in range(fold_plan.k):
            splits = [fold_plan.split(t, fold) for t in data]
            train = [s[0] for s in splits]
            test = _concat([s[1] for s in splits], "test")
            if fraction < 1.0:
                train = subsample_training(train, fraction, _fold_seed(seed, "subsample", fold))
            result.test_sets[fold] = test.X.tobytes() + test.y.tobytes()
            if task == "classification":
                train = [t.take(supersample_balance(t, _fold_seed(seed, "balance", fold)).indices) for t in train]
            models = {local_scenario(t.site_id): _fit_local(algorithm, t, train_config, threads) for t in train}
            central_cfg = replace(train_config, n_trees=n_sites * fcfg.trees_per_client)
            models[CENTRALIZED] = _fit_local(algorithm, _concat(train), central_cfg, threads)
            fed = _run_federated(algorithm, train, fcfg, threads)
            models[FEDERATED] = fed.model
            result.round_logs[(algorithm, fold)] = fed.log
            result.models_trained += len(models)
            _score(result, algorithm, fold, models, test, task, _fold_seed(seed, "test-subsets", fold))
            log.info("%s fold %d done", algorithm, fold)
    return result


def _fit_local(algorithm: str, table: SiteTable, config: TrainConfig, threads: int):
    if algorithm == "linear":
        return fit_ols(table.X, table.y, config.ridge_jitter)
    task = ALGORITHMS[algorithm][0]
    return fit_forest(table.X, table.y, config, task, threads=threads)


def _run_federated(algorithm: str, train: list[SiteTable], config: FedConfig, threads: int):
    if algorithm == "linear":
        return run_federated_linear(train, config, threads=threads)
    if algorithm == "rf_regression":
        return run_federated_rf_regression(train, config, threads=threads)
    return run_federated_rf_classification(train, config, threads=threads)


def _score(result: ExperimentResult, algorithm: str, fold: int, models: dict, test: SiteTable,
           task: str, subset_seed: int) -> None:
    local_names = [name for name in models if name.startswith("local:")]
    if task == "regression":
        for name, model in models.items():
            pred = predict(model, test.X)
            result.add(algorithm, fold, name, "r_squared", r_squared(test.y, pred))
            result.add(algorithm, fold, name, "rmse", rmse(test.y, pred))
        for metric in METRICS[task]:
            values = [result.cells[(algorithm, fold, name, metric, "")] for name in local_names]
            result.add(algorithm, fold, LOCAL_AVERAGE, metric, float(np.mean(values)))
        return
    subsets = balanced_test_subsets(test.y, 4, subset_seed)
    for name, model in models.items():
        proba = predict_proba(model, test.X)
        labels = (proba >= 0.5).astype(np.float64)
        for j, subset in enumerate(subsets):
            rows = subset.indices
            result.add(algorithm, fold, name, "accuracy", accuracy(test.y[rows], labels[rows]), str(j))
            result.add(algorithm, fold, name, "auroc", auroc(test.y[rows], proba[rows]), str(j))
    for metric in METRICS[task]:
        for j in range(len(subsets)):
            values = [result.cells[(algorithm, fold, name, metric, str(j))] for name in local_names]
            result.add(algorithm, fold, LOCAL_AVERAGE, metric, float(np.mean(values)), str(j))
        for name in list(models) + [LOCAL_AVERAGE]:
            values = [result.cells[(algorithm, fold, name, metric, str(j))] for j in range(len(subsets))]
            result.add(algorithm, fold, name, metric, float(np.mean(values)), SUBSET_MEAN)
