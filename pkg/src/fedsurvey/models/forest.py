from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch, InsufficientData
from ..rng import stream, stream_key
from .linear import LinearModel
from .tree import CLASSIFICATION, REGRESSION, Tree, grow_tree

TASK_CODES = {"regression": REGRESSION, "classification": CLASSIFICATION}


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_leaf: int = 5
    features_per_split: int | str = "sqrt"
    seed: int = 0
    ridge_jitter: float = 1e-8

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0 or None")
        if self.ridge_jitter < 0:
            raise ValueError("ridge_jitter must be >= 0")
        if isinstance(self.features_per_split, str):
            if self.features_per_split != "sqrt":
                raise ValueError(f"unknown features_per_split {self.features_per_split!r}")
        elif self.features_per_split < 1:
            raise ValueError("features_per_split must be >= 1")

    def resolve_features(self, n_features: int) -> int:
        if self.features_per_split == "sqrt":
            return max(1, math.ceil(math.sqrt(n_features)))
        return min(int(self.features_per_split), n_features)


@dataclass(frozen=True, eq=False)
class Forest:
    trees: tuple[Tree, ...]
    task: str
    n_features: int
    tree_keys: tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "tree_keys", tuple(int(k) for k in self.tree_keys))
        if not self.trees:
            raise ValueError("a forest needs at least one tree")
        if self.task not in TASK_CODES:
            raise ValueError(f"unknown task {self.task!r}")
        if self.tree_keys and len(self.tree_keys) != len(self.trees):
            raise ValueError("one tree key per tree")

    def __len__(self):
        return len(self.trees)

    def equals(self, other: Forest) -> bool:
        return (self.task == other.task and self.n_features == other.n_features
                and len(self) == len(other)
                and all(a.equals(b) for a, b in zip(self.trees, other.trees)))


def tree_seed_key(seed: int, tree_index: int) -> int:
    return stream_key(seed, "tree", tree_index)


def fit_forest(X, y, config: TrainConfig, task: str, *, first_tree: int = 0, threads: int = 1) -> Forest:
    """Bagged CART forest.

    Tree ``i`` bootstraps from ``stream(seed, "tree", first_tree + i)`` and
    draws node features from the same index, so a forest of ``n`` trees is a
    prefix of one with more trees and ``first_tree`` lets several parties
    grow disjoint slices of one global index range.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if task not in TASK_CODES:
        raise ValueError(f"unknown task {task!r}")
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DimensionMismatch(f"X {X.shape} and y {y.shape} do not align")
    n, m = X.shape
    if n < 2 * config.min_samples_leaf:
        raise InsufficientData(f"{n} rows cannot fill two leaves of {config.min_samples_leaf}")
    k = config.resolve_features(m)
    node_key = stream_key(config.seed, "node-features")
    indices = range(first_tree, first_tree + config.n_trees)

    def grow(tree_index: int) -> Tree:
        rows = stream(config.seed, "tree", tree_index).integers(0, n, size=n)
        return grow_tree(X, y, rows, task=TASK_CODES[task], max_depth=config.max_depth,
                         min_samples_leaf=config.min_samples_leaf, features_per_split=k,
                         key=node_key, tree_id=tree_index)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(grow, indices))
    else:
        trees = [grow(i) for i in indices]
    return Forest(tuple(trees), task, m, tuple(tree_seed_key(config.seed, i) for i in indices))


def predict_proba(forest: Forest, X) -> np.ndarray:
    """Positive-class probability: mean over trees of the leaf positive fraction."""
    if forest.task != "classification":
        raise ValueError("predict_proba needs a classification forest")
    return _mean_tree_value(forest, X)


def predict(model, X) -> np.ndarray:
    """Predictions of a LinearModel or Forest.

    Regression forests average their trees; classification forests return
    labels, positive when the mean leaf positive fraction is at least 0.5.
    """
    if isinstance(model, LinearModel):
        return model.predict(X)
    if isinstance(model, Forest):
        values = _mean_tree_value(model, X)
        if model.task == "classification":
            return (values >= 0.5).astype(np.float64)
        return values
    raise TypeError(f"cannot predict with {type(model).__name__}")


def _mean_tree_value(forest: Forest, X) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise DimensionMismatch(f"expected {forest.n_features} features, got shape {X.shape}")
    per_tree = np.stack([tree.predict(X) for tree in forest.trees])
    # summing sorted values makes the mean independent of tree order
    return np.sort(per_tree, axis=0).sum(axis=0) / len(forest.trees)
