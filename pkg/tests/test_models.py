import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fedsurvey.errors import DegenerateDesign, DimensionMismatch, InsufficientData
from fedsurvey.models import (
    Forest,
    LinearModel,
    TrainConfig,
    Tree,
    dumps,
    fit_forest,
    fit_ols,
    loads,
    predict,
    predict_proba,
)
from fedsurvey.models.histogram import choose_split, flatten_grid, node_histogram
from fedsurvey.models.tree import REGRESSION, grow_tree


def leaf(value, weight=1.0, positives=0.0):
    return Tree([-1], [0.0], [-1], [-1], [value], [weight], [positives])


# -- OLS ---------------------------------------------------------------------

def test_ols_exact_line():
    model = fit_ols([[0.0], [1.0], [2.0]], [1.0, 3.0, 5.0])
    assert model.intercept == pytest.approx(1.0, abs=1e-12)
    assert model.coefficients[0] == pytest.approx(2.0, abs=1e-12)
    assert not model.ridge


def test_ols_constant_column_without_jitter():
    X = np.column_stack([np.ones(10), np.arange(10.0)])
    with pytest.raises(DegenerateDesign):
        fit_ols(X, np.arange(10.0), jitter=0.0)


def test_ols_rank_deficient_with_jitter_is_flagged():
    X = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
    model = fit_ols(X, np.arange(10.0), jitter=1e-8)
    assert model.ridge
    np.testing.assert_allclose(model.predict(X), np.arange(10.0), atol=1e-6)


def test_ols_underdetermined_uses_ridge():
    model = fit_ols(np.eye(3), [1.0, 2.0, 3.0], jitter=1e-6)
    assert model.ridge


def test_ols_recovers_coefficients():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(200, 5))
    beta = np.array([1.5, -2.0, 0.0, 0.25, 3.0])
    model = fit_ols(X, X @ beta + 0.7)
    np.testing.assert_allclose(model.coefficients, beta, atol=1e-8)
    assert model.intercept == pytest.approx(0.7, abs=1e-8)


@given(st.integers(5, 60), st.integers(1, 4), st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_ols_residuals_orthogonal(n, m, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n + m, m))
    y = rng.normal(size=n + m)
    model = fit_ols(X, y)
    resid = y - model.predict(X)
    A = np.column_stack([np.ones(len(y)), X])
    scale = np.linalg.norm(A, axis=0) * max(np.linalg.norm(y), 1.0)
    assert np.all(np.abs(A.T @ resid) <= 1e-8 * scale)


def test_linear_predict_and_mismatch():
    model = LinearModel(1.0, [2.0])
    assert predict(model, [[3.0]])[0] == 7.0
    with pytest.raises(DimensionMismatch):
        predict(model, [[1.0, 2.0]])


# -- trees and forests -------------------------------------------------------

def test_pure_node_is_leaf():
    X = np.arange(20.0)[:, None]
    forest = fit_forest(X, np.ones(20), TrainConfig(n_trees=3, min_samples_leaf=1), "classification")
    assert all(t.n_nodes == 1 for t in forest.trees)


def test_max_depth_zero_gives_single_leaves():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(50, 3))
    y = rng.normal(size=50)
    forest = fit_forest(X, y, TrainConfig(n_trees=4, max_depth=0), "regression")
    assert all(t.n_nodes == 1 for t in forest.trees)
    # each leaf predicts the mean of its bootstrap sample
    for t in forest.trees:
        assert t.weight[0] == 50
        assert np.min(y) <= t.value[0] <= np.max(y)


def test_max_depth_zero_majority_vote():
    y = np.array([1.0] * 40 + [0.0] * 10)
    X = np.zeros((50, 1))
    forest = fit_forest(X, y, TrainConfig(n_trees=5, max_depth=0), "classification")
    assert (predict(forest, X) == 1).all()


def test_step_function_training_accuracy():
    x = np.linspace(0, 1, 200)[:, None]
    y = (x[:, 0] > 0.5).astype(float)
    forest = fit_forest(x, y, TrainConfig(n_trees=50, min_samples_leaf=1), "classification")
    assert (predict(forest, x) == y).mean() >= 0.98


def test_mean_of_two_trees():
    forest = Forest((leaf(4.0), leaf(6.0)), "regression", 1)
    assert predict(forest, [[0.0]])[0] == 5.0


def test_three_of_four_trees_vote_positive():
    trees = tuple(leaf(v, 1.0, v) for v in (1.0, 1.0, 1.0, 0.0))
    forest = Forest(trees, "classification", 1)
    assert predict_proba(forest, [[0.0]])[0] == 0.75
    assert predict(forest, [[0.0]])[0] == 1.0


def test_tie_probability_is_positive():
    forest = Forest((leaf(1.0, 1, 1), leaf(0.0, 1, 0)), "classification", 1)
    assert predict(forest, [[0.0]])[0] == 1.0


def test_forest_prediction_permutation_invariant():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(120, 4))
    y = X[:, 0] * 3 + rng.normal(size=120)
    forest = fit_forest(X, y, TrainConfig(n_trees=9, seed=4), "regression")
    order = rng.permutation(9)
    shuffled = Forest(tuple(forest.trees[i] for i in order), "regression", 4)
    np.testing.assert_array_equal(predict(forest, X), predict(shuffled, X))


def test_forest_prefix_property_and_threads(regression_sites):
    t = regression_sites[0]
    small = fit_forest(t.X, t.y, TrainConfig(n_trees=3, seed=6), "regression")
    big = fit_forest(t.X, t.y, TrainConfig(n_trees=6, seed=6), "regression", threads=3)
    assert all(a.equals(b) for a, b in zip(small.trees, big.trees[:3]))
    serial = fit_forest(t.X, t.y, TrainConfig(n_trees=6, seed=6), "regression")
    assert big.equals(serial)


def test_singleton_leaves_reproduce_targets():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(40, 3))
    y = rng.normal(size=40)
    rows = np.arange(40)
    tree = grow_tree(X, y, rows, task=REGRESSION, max_depth=None, min_samples_leaf=1, features_per_split=3,
                     key=11, tree_id=0)
    leaves = tree.apply(X)
    for i, node in enumerate(leaves):
        if tree.weight[node] == 1:
            assert tree.value[node] == y[i]


def test_thresholds_are_midpoints():
    X = np.array([[0.0], [1.0], [3.0], [4.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    tree = grow_tree(X, y, np.arange(4), task=1, max_depth=None, min_samples_leaf=1, features_per_split=1,
                     key=0, tree_id=0)
    assert tree.threshold[0] == 2.0


def test_accepted_splits_have_positive_gini_gain(classification_sites):
    t = classification_sites[0]
    forest = fit_forest(t.X, t.y, TrainConfig(n_trees=5, min_samples_leaf=2), "classification")
    for tree in forest.trees:
        for node in np.flatnonzero(~tree.is_leaf):
            def gini_mass(i):
                n, p = tree.weight[i], tree.positives[i]
                return (p * p + (n - p) ** 2) / n
            gain = gini_mass(tree.left[node]) + gini_mass(tree.right[node]) - gini_mass(node)
            assert gain > 0


def test_fit_forest_insufficient_data():
    with pytest.raises(InsufficientData):
        fit_forest(np.zeros((5, 1)), np.zeros(5), TrainConfig(min_samples_leaf=5), "regression")


def test_forest_dimension_mismatch(regression_sites):
    t = regression_sites[0]
    forest = fit_forest(t.X, t.y, TrainConfig(n_trees=2), "regression")
    with pytest.raises(DimensionMismatch):
        predict(forest, np.zeros((3, 7)))


@pytest.mark.parametrize("kwargs", [{"n_trees": 0}, {"min_samples_leaf": 0}, {"features_per_split": "log2"},
                                    {"ridge_jitter": -1.0}])
def test_train_config_validation(kwargs):
    with pytest.raises(ValueError):
        TrainConfig(**kwargs)


def test_features_per_split_sqrt():
    assert TrainConfig().resolve_features(51) == 8
    assert TrainConfig(features_per_split=3).resolve_features(2) == 2


# -- histogram helpers -------------------------------------------------------

def test_node_histogram_counts_by_hand():
    X = np.array([[0.1], [0.4], [0.6], [0.9]])
    y = np.array([1.0, 0.0, 1.0, 0.0])
    counts, sizes = node_histogram(X, y, np.arange(4), [0], flatten_grid([np.array([0.5])]))
    assert sizes.tolist() == [1]
    assert counts.tolist() == [[1, 1, 1, 1]]


def test_choose_split_tie_breaks_low_feature_then_threshold():
    counts = np.array([[2, 0, 0, 2], [2, 0, 0, 2], [2, 0, 0, 2]])
    best = choose_split(2.0, 2.0, [3, 5], counts, [2, 1], [None, None, None, [0.1, 0.2], None, [0.7]], 1)
    assert best[0] == 3 and best[1] == 0.1


def test_choose_split_rejects_zero_gain():
    counts = np.array([[1, 1, 1, 1]])
    assert choose_split(2.0, 2.0, [0], counts, [1], [[0.5]], 1) is None


# -- serialization -----------------------------------------------------------

def test_model_text_round_trip(regression_sites, classification_sites):
    t = regression_sites[0]
    lin = fit_ols(t.X, t.y)
    back = loads(dumps(lin))
    np.testing.assert_array_equal(back.coefficients, lin.coefficients)
    assert back.intercept == lin.intercept
    c = classification_sites[0]
    forest = fit_forest(c.X, c.y, TrainConfig(n_trees=3), "classification")
    text = dumps(forest)
    assert '"kind": "forest"' in text and '"version": 1' in text
    assert loads(text).equals(forest)
    assert loads(text).tree_keys == forest.tree_keys
