import math

import numpy as np
import pytest

from fedsurvey.dataset import SiteTable, make_fold_plan, synthetic_schema
from fedsurvey.errors import OneClassOnly, ZeroVariance
from fedsurvey.evaluation import (
    CENTRALIZED,
    FEDERATED,
    LOCAL_AVERAGE,
    SUBSET_MEAN,
    ExperimentResult,
    accuracy,
    auroc,
    local_scenario,
    r_squared,
    relative_improvement,
    rmse,
    run_experiment,
)
from fedsurvey.federation import FedConfig
from fedsurvey.models import TrainConfig

from conftest import make_sites
from oracles import brute_auroc


# -- metrics -----------------------------------------------------------------

def test_r_squared_examples():
    y = [0.0, 1.0, 2.0, 3.0]
    assert r_squared(y, y) == 1.0
    assert r_squared(y, [1.5] * 4) == 0.0
    assert r_squared(y, [0.0, 1.0, 2.0, 5.0]) == pytest.approx(0.2, abs=1e-12)


def test_r_squared_zero_variance():
    with pytest.raises(ZeroVariance):
        r_squared([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


def test_r_squared_permutation_invariant():
    rng = np.random.default_rng(0)
    y, p = rng.normal(size=50), rng.normal(size=50)
    order = rng.permutation(50)
    assert r_squared(y, p) == pytest.approx(r_squared(y[order], p[order]), abs=1e-12)


def test_rmse_examples():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rmse([1.0, 2.0, 3.0], [3.0, 4.0, 5.0]) == pytest.approx(2.0, abs=1e-12)
    assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(5 / math.sqrt(2), abs=1e-12)


def test_accuracy_examples():
    y = np.array([1.0, 0.0, 1.0, 0.0])
    assert accuracy(y, y) == 1.0
    assert accuracy(y, 1 - y) == 0.0
    assert accuracy(y, [1.0, 0.0, 1.0, 1.0]) == 0.75


def test_auroc_examples():
    assert auroc([1, 0, 1, 0], [0.9, 0.8, 0.4, 0.3]) == 0.75
    assert auroc([1, 1, 0, 0], [0.9, 0.8, 0.4, 0.3]) == 1.0
    assert auroc([1, 0, 1, 0], [0.5] * 4) == 0.5
    with pytest.raises(OneClassOnly):
        auroc([1, 1], [0.2, 0.3])


def test_auroc_matches_brute_force_with_ties():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(2, 120))
        y = rng.integers(0, 2, size=n)
        y[0], y[1] = 0, 1
        s = np.round(rng.random(n), 1)
        assert auroc(y, s) == pytest.approx(brute_auroc(y, s), abs=1e-12)


def test_relative_improvement_examples():
    assert relative_improvement(0.34, 0.32) == pytest.approx(6.25, abs=1e-9)
    assert relative_improvement(18.2, 18.6, "lower_better") == pytest.approx(2.1505, abs=1e-3)
    assert relative_improvement(0.5, 0.5) == 0.0
    with pytest.raises(ZeroDivisionError):
        relative_improvement(0.3, 0.0)


def test_result_rejects_non_finite():
    with pytest.raises(ValueError):
        ExperimentResult().add("linear", 0, CENTRALIZED, "r_squared", math.nan)


# -- experiment --------------------------------------------------------------

FAST = TrainConfig(n_trees=3, min_samples_leaf=3)


def test_regression_experiment_counts_and_shared_test_sets():
    tables = make_sites([40, 35, 30, 30, 25], m=3, seed=3)
    plan = make_fold_plan(tables, 5, seed=1)
    result = run_experiment(tables, synthetic_schema(3), plan, ["linear"], seed=1)
    assert result.models_trained == 35
    scenarios = {k[2] for k in result.cells}
    assert scenarios == {local_scenario(t.site_id) for t in tables} | {LOCAL_AVERAGE, CENTRALIZED, FEDERATED}
    for fold in range(5):
        locals_ = [result.cells[("linear", fold, local_scenario(t.site_id), "rmse", "")] for t in tables]
        assert result.cells[("linear", fold, LOCAL_AVERAGE, "rmse", "")] == pytest.approx(np.mean(locals_))
    # test rows are the union of per-site test splits, disjoint from training
    for fold in range(5):
        X = np.vstack([plan.split(t, fold)[1].X for t in tables])
        assert result.test_sets[fold].startswith(X.tobytes())


def test_single_site_scenarios_agree_for_linear():
    tables = make_sites([60], m=3, seed=4)
    plan = make_fold_plan(tables, 5, seed=2)
    result = run_experiment(tables, synthetic_schema(3), plan, ["linear"], seed=2)
    for metric in ("r_squared", "rmse"):
        local = result.fold_values("linear", LOCAL_AVERAGE, metric)
        np.testing.assert_allclose(result.fold_values("linear", CENTRALIZED, metric), local, atol=1e-9)
        np.testing.assert_allclose(result.fold_values("linear", FEDERATED, metric), local, atol=1e-9)


def test_classification_four_subsets_per_fold():
    rng = np.random.default_rng(5)
    tables = []
    for i, n in enumerate((80, 64, 64)):
        y = (np.arange(n) % 8 == 0).astype(float)
        X = rng.normal(size=(n, 2)) + y[:, None]
        tables.append(SiteTable(f"s{i}", X, y))
    plan = make_fold_plan(tables, 2, seed=3)
    fcfg = FedConfig(trees_per_client=2, thresholds=8)
    schema = synthetic_schema(2, "classification")
    result = run_experiment(tables, schema, plan, ["rf_classification"], fcfg, seed=3, train_config=FAST)
    for fold in range(2):
        for scenario in (CENTRALIZED, FEDERATED, LOCAL_AVERAGE):
            subsets = {k[4] for k in result.cells if k[1] == fold and k[2] == scenario and k[3] == "accuracy"}
            assert subsets == {"0", "1", "2", "3", SUBSET_MEAN}
            vals = [result.cells[("rf_classification", fold, scenario, "auroc", str(j))] for j in range(4)]
            mean = result.cells[("rf_classification", fold, scenario, "auroc", SUBSET_MEAN)]
            assert mean == pytest.approx(np.mean(vals))


def test_experiment_rejects_task_mismatch(regression_sites):
    plan = make_fold_plan(regression_sites, 2, seed=0)
    with pytest.raises(ValueError):
        run_experiment(regression_sites, synthetic_schema(4), plan, ["rf_classification"])


def test_subsampling_keeps_test_sets():
    tables = make_sites([60, 50], m=2, seed=6)
    plan = make_fold_plan(tables, 3, seed=0)
    full = run_experiment(tables, synthetic_schema(2), plan, ["linear"], seed=0)
    part = run_experiment(tables, synthetic_schema(2), plan, ["linear"], seed=0, fraction=0.25)
    assert full.test_sets == part.test_sets
    assert full.cells != part.cells
