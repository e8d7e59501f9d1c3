"""Classification trees restricted to a fixed grid of candidate thresholds.

These are the trees the federated classification protocol builds. The
split rule works on class-count histograms only, so the aggregator and the
centralized reference below share it while counting rows independently.
"""
from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from numba import njit

from ..errors import DimensionMismatch, InsufficientData
from ..rng import node_features, stream
from .forest import Forest, TrainConfig
from .tree import Tree


def candidate_thresholds(minima, maxima, q: int) -> list[np.ndarray]:
    """``q`` equally spaced points strictly inside each feature's [min, max]."""
    if q < 1:
        raise ValueError("need at least one candidate threshold")
    grid = []
    steps = np.arange(1, q + 1) / (q + 1)
    for lo, hi in zip(np.asarray(minima, dtype=float), np.asarray(maxima, dtype=float)):
        if hi > lo:
            grid.append(lo + (hi - lo) * steps)
        else:
            grid.append(np.empty(0))
    return grid


def flatten_grid(thresholds: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated thresholds plus per-feature offsets, as the kernel expects."""
    sizes = np.array([len(t) for t in thresholds], dtype=np.int64)
    offsets = np.zeros(len(thresholds) + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])
    flat = np.concatenate([np.asarray(t, dtype=np.float64) for t in thresholds]) if len(thresholds) else np.empty(0)
    return flat, offsets


@njit(cache=True, nogil=True)
def _histogram_kernel(X, y, rows, features, flat, offsets):
    total = 0
    for f in features:
        total += offsets[f + 1] - offsets[f]
    out = np.zeros((total, 4), dtype=np.int64)
    n_pos = 0
    for r in rows:
        if y[r] == 1.0:
            n_pos += 1
    n_neg = rows.shape[0] - n_pos
    at = 0
    for f in features:
        lo = offsets[f]
        q = offsets[f + 1] - lo
        grid = flat[lo:lo + q]
        pos_bins = np.zeros(q + 1, dtype=np.int64)
        neg_bins = np.zeros(q + 1, dtype=np.int64)
        for r in rows:
            # number of thresholds strictly below x; the row goes left of every later one
            b = np.searchsorted(grid, X[r, f])
            if y[r] == 1.0:
                pos_bins[b] += 1
            else:
                neg_bins[b] += 1
        lp = 0
        ln = 0
        for qi in range(q):
            lp += pos_bins[qi]
            ln += neg_bins[qi]
            out[at + qi, 0] = lp
            out[at + qi, 1] = ln
            out[at + qi, 2] = n_pos - lp
            out[at + qi, 3] = n_neg - ln
        at += q
    return out


def node_histogram(X: np.ndarray, y: np.ndarray, rows, features, grid: tuple[np.ndarray, np.ndarray]
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Class counts of the node's rows around every candidate threshold.

    Returns ``(counts, sizes)``: ``counts`` stacks, feature after feature,
    one row (left_pos, left_neg, right_pos, right_neg) per threshold and
    ``sizes[j]`` is the number of thresholds of ``features[j]``. ``rows``
    selects the node's rows of ``X``; ``grid`` comes from :func:`flatten_grid`.
    Left means ``x <= threshold``.
    """
    flat, offsets = grid
    features = np.asarray(features, dtype=np.int64)
    counts = _histogram_kernel(X, y, np.asarray(rows, dtype=np.int64), features, flat, offsets)
    return counts, offsets[features + 1] - offsets[features]


def split_counts(counts: np.ndarray, sizes) -> list[np.ndarray]:
    """Per-feature (q, 4) views of a stacked count array."""
    ends = np.cumsum(sizes).tolist()
    return [counts[a:b] for a, b in zip([0] + ends[:-1], ends)]


def is_terminal(depth: int, neg: float, pos: float, config: TrainConfig) -> bool:
    n = neg + pos
    return ((config.max_depth is not None and depth >= config.max_depth)
            or n < 2 * config.min_samples_leaf or pos == 0 or neg == 0)


def choose_split(neg: float, pos: float, features, counts: np.ndarray, sizes, thresholds, min_leaf: int):
    """Best Gini split on pooled stacked counts, or None.

    Returns ``(feature, threshold, quadruple)``. Ties go to the lowest
    feature index, then the lowest threshold.
    """
    if counts.shape[0] == 0:
        return None
    n = neg + pos
    parent = (pos * pos + neg * neg) / n
    lp, ln, rp, rn = counts.astype(np.float64).T
    nl = lp + ln
    nr = rp + rn
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = (lp * lp + ln * ln) / nl + (rp * rp + rn * rn) / nr - parent
    gain[(nl < min_leaf) | (nr < min_leaf)] = -np.inf
    best = int(np.argmax(gain))  # first maximum: lowest feature, then lowest threshold
    if not gain[best] > 1e-12 * n:
        return None
    ends = np.cumsum(sizes)
    j = int(np.searchsorted(ends, best, side="right"))
    qi = best - (int(ends[j - 1]) if j else 0)
    f = int(features[j])
    return f, float(thresholds[f][qi]), counts[best].copy()


class TreeBuilder:
    """Accumulates nodes of one tree in breadth-first id order."""

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.weight: list[float] = []
        self.positives: list[float] = []
        self.depth: list[int] = []

    def add_node(self, depth: int, neg: float, pos: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.weight.append(neg + pos)
        self.positives.append(pos)
        self.depth.append(depth)
        return len(self.feature) - 1

    def split(self, node: int, feature: int, threshold: float, quad) -> tuple[int, int]:
        lp, ln, rp, rn = (float(v) for v in quad)
        self.feature[node] = feature
        self.threshold[node] = threshold
        left = self.add_node(self.depth[node] + 1, ln, lp)
        right = self.add_node(self.depth[node] + 1, rn, rp)
        self.left[node] = left
        self.right[node] = right
        return left, right

    def counts(self, node: int) -> tuple[float, float]:
        return self.weight[node] - self.positives[node], self.positives[node]

    def build(self) -> Tree:
        weight = np.array(self.weight)
        positives = np.array(self.positives)
        value = np.divide(positives, weight, out=np.zeros_like(weight), where=weight > 0)
        return Tree(self.feature, self.threshold, self.left, self.right, value, weight, positives)


def hist_bootstrap(seed: int, party_key: str, tree_id: int, n: int) -> np.ndarray:
    return stream(seed, "hist-bootstrap", party_key, tree_id).integers(0, n, size=n)


def grow_histogram_tree(X, y, rows, thresholds, config: TrainConfig, tree_id: int) -> Tree:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    m = X.shape[1]
    k = config.resolve_features(m)
    grid = flatten_grid(thresholds)
    builder = TreeBuilder()
    members = {0: np.asarray(rows, dtype=np.int64)}
    yr = y[members[0]]
    builder.add_node(0, float((yr == 0).sum()), float((yr == 1).sum()))
    node = 0
    while node < len(builder.feature):
        idx = members.pop(node)
        neg, pos = builder.counts(node)
        if not is_terminal(builder.depth[node], neg, pos, config):
            feats = node_features(config.seed, tree_id, node, m, k)
            counts, sizes = node_histogram(X, y, idx, feats, grid)
            best = choose_split(neg, pos, feats, counts, sizes, thresholds, config.min_samples_leaf)
            if best is not None:
                f, t, quad = best
                left, right = builder.split(node, f, t, quad)
                goes_left = X[idx, f] <= t
                members[left] = idx[goes_left]
                members[right] = idx[~goes_left]
        node += 1
    return builder.build()


def fit_histogram_forest(X, y, thresholds, config: TrainConfig, *, n_trees: int | None = None,
                         party_key: str = "central", first_tree: int = 0) -> Forest:
    """Centralized histogram forest on the given candidate grid.

    With ``party_key`` equal to a client's site id this reproduces the
    forest that client would build alone through the federated protocol.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],) or len(thresholds) != X.shape[1]:
        raise DimensionMismatch("X, y and threshold grid do not align")
    if X.shape[0] < 2:
        raise InsufficientData("need at least two rows")
    n_trees = config.n_trees if n_trees is None else n_trees
    trees = []
    for tree_id in range(first_tree, first_tree + n_trees):
        rows = hist_bootstrap(config.seed, party_key, tree_id, X.shape[0])
        trees.append(grow_histogram_tree(X, y, rows, thresholds, config, tree_id))
    return Forest(tuple(trees), "classification", X.shape[1])
