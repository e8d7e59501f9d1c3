"""Flat-array decision trees and the CART grower.

A tree is stored as parallel arrays indexed by node id. Node ids are
assigned breadth-first in creation order, so the root is 0 and a node's
children always carry larger ids. Leaves have ``feature == -1``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ..rng import draw_node_features

REGRESSION = 0
CLASSIFICATION = 1

LEAF = -1


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray     # int32, LEAF for leaves
    threshold: np.ndarray   # float64; rows with x <= threshold go left
    left: np.ndarray        # int32 child id, -1 for leaves
    right: np.ndarray       # int32
    value: np.ndarray       # float64; leaf mean (regression) or positive fraction
    weight: np.ndarray      # float64; samples routed to the node
    positives: np.ndarray   # float64; positive-class samples (0 for regression)

    def __post_init__(self):
        for name, dtype in (("feature", np.int32), ("threshold", np.float64), ("left", np.int32),
                            ("right", np.int32), ("value", np.float64), ("weight", np.float64),
                            ("positives", np.float64)):
            arr = np.array(getattr(self, name), dtype=dtype).reshape(-1)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        n = self.feature.shape[0]
        if n == 0 or any(getattr(self, a).shape[0] != n for a in
                         ("threshold", "left", "right", "value", "weight", "positives")):
            raise ValueError("tree arrays must be non-empty and of equal length")

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature == LEAF

    def class_counts(self, node: int) -> tuple[float, float]:
        """(negatives, positives) at ``node``."""
        return self.weight[node] - self.positives[node], self.positives[node]

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] != LEAF:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def apply(self, X) -> np.ndarray:
        """Leaf id reached by each row."""
        return _apply(self.feature, self.threshold, self.left, self.right, np.ascontiguousarray(X, dtype=np.float64))

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def same_structure(self, other: Tree) -> bool:
        return (self.n_nodes == other.n_nodes
                and np.array_equal(self.feature, other.feature)
                and np.array_equal(self.left, other.left)
                and np.array_equal(self.right, other.right)
                and np.array_equal(self.threshold, other.threshold))

    def equals(self, other: Tree) -> bool:
        return (self.same_structure(other)
                and np.array_equal(self.value, other.value)
                and np.array_equal(self.weight, other.weight)
                and np.array_equal(self.positives, other.positives))


@numba.njit(cache=True, nogil=True)
def _apply(feature, threshold, left, right, X):
    out = np.empty(X.shape[0], dtype=np.int64)
    for i in range(X.shape[0]):
        node = 0
        while feature[node] != -1:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@numba.njit(cache=True, nogil=True)
def _best_split(X, y, rows, start, end, features, task, min_leaf, offset, parent_score):
    """Scan sorted candidate features for the best impurity decrease.

    Returns (feature, threshold, gain); feature = -1 if nothing beats zero.
    Ties keep the first candidate met, i.e. lowest feature then lowest
    threshold, because features arrive sorted and thresholds ascend.
    """
    n = end - start
    best_f = -1
    best_t = 0.0
    best_gain = 0.0
    xs = np.empty(n)
    ys = np.empty(n)
    # Impurities are compared through "score" = sum over children of
    # (class sums)^2 / size; gain = score - parent_score.
    spread = 0.0
    for i in range(n):
        d = y[rows[start + i]] - offset
        spread += d * d
    tol = 1e-12 * max(spread, 1e-300)
    for fi in range(features.shape[0]):
        f = features[fi]
        for i in range(n):
            xs[i] = X[rows[start + i], f]
        order = np.argsort(xs, kind="mergesort")
        sx = xs[order]
        for i in range(n):
            ys[i] = y[rows[start + order[i]]] - offset
        sy = ys
        total = 0.0
        for i in range(n):
            total += sy[i]
        if task == 0:
            parent_score = total * total / n
        left_sum = 0.0
        for p in range(n - 1):
            left_sum += sy[p]
            nl = p + 1
            nr = n - nl
            if nl < min_leaf:
                continue
            if nr < min_leaf:
                break
            if not sx[p] < sx[p + 1]:
                continue
            right_sum = total - left_sum
            if task == 0:
                score = left_sum * left_sum / nl + right_sum * right_sum / nr
            else:
                lneg = nl - left_sum
                rneg = nr - right_sum
                score = (left_sum * left_sum + lneg * lneg) / nl + (right_sum * right_sum + rneg * rneg) / nr
            gain = score - parent_score
            if gain > tol and gain > best_gain:
                best_gain = gain
                best_f = f
                t = 0.5 * (sx[p] + sx[p + 1])
                if not t < sx[p + 1]:
                    t = sx[p]
                best_t = t
    return best_f, best_t, best_gain


@numba.njit(cache=True, nogil=True)
def _grow(X, y, rows, task, max_depth, min_leaf, k, key, tree_id):
    n = rows.shape[0]
    m = X.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int32)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int32)
    right = np.full(cap, -1, dtype=np.int32)
    value = np.zeros(cap)
    weight = np.zeros(cap)
    positives = np.zeros(cap)
    starts = np.zeros(cap, dtype=np.int64)
    ends = np.zeros(cap, dtype=np.int64)
    depths = np.zeros(cap, dtype=np.int64)
    rows = rows.copy()
    ends[0] = n
    n_nodes = 1
    node = 0
    scratch = np.empty(n, dtype=np.int64)
    while node < n_nodes:
        s = starts[node]
        e = ends[node]
        cnt = e - s
        total = 0.0
        ymin = np.inf
        ymax = -np.inf
        for i in range(s, e):
            v = y[rows[i]]
            total += v
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v
        weight[node] = cnt
        value[node] = total / cnt
        if task == 1:
            positives[node] = total
        stop = (max_depth >= 0 and depths[node] >= max_depth) or cnt < 2 * min_leaf or ymin == ymax
        if not stop:
            # regression targets are centred at the node mean for accurate scores
            if task == 0:
                offset = total / cnt
                csum = 0.0
                for i in range(s, e):
                    csum += y[rows[i]] - offset
                parent_score = csum * csum / cnt
            else:
                offset = 0.0
                parent_score = (total * total + (cnt - total) * (cnt - total)) / cnt
            feats = draw_node_features(key, tree_id, node, m, k)
            f, t, gain = _best_split(X, y, rows, s, e, feats, task, min_leaf, offset, parent_score)
            if f >= 0:
                nl = 0
                nr = 0
                for i in range(s, e):
                    r = rows[i]
                    if X[r, f] <= t:
                        rows[s + nl] = r
                        nl += 1
                    else:
                        scratch[nr] = r
                        nr += 1
                for i in range(nr):
                    rows[s + nl + i] = scratch[i]
                feature[node] = f
                threshold[node] = t
                left[node] = n_nodes
                right[node] = n_nodes + 1
                starts[n_nodes] = s
                ends[n_nodes] = s + nl
                depths[n_nodes] = depths[node] + 1
                starts[n_nodes + 1] = s + nl
                ends[n_nodes + 1] = e
                depths[n_nodes + 1] = depths[node] + 1
                n_nodes += 2
        node += 1
    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
            value[:n_nodes], weight[:n_nodes], positives[:n_nodes])


def grow_tree(X, y, rows, *, task: int, max_depth: int | None, min_samples_leaf: int,
              features_per_split: int, key: int, tree_id: int) -> Tree:
    """Grow one CART tree on ``X[rows]`` (``rows`` may repeat, e.g. a bootstrap)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    depth = -1 if max_depth is None else int(max_depth)
    arrays = _grow(X, y, rows, task, depth, int(min_samples_leaf), int(features_per_split),
                   np.uint64(key), int(tree_id))
    return Tree(*arrays)
