"""Protocol messages exchanged between clients and the aggregator.

Messages carry model parameters, per-feature ranges and class counts only.
No variant has a field that holds a data row, so raw rows cannot reach the
wire by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..models.forest import Forest
from ..models.linear import LinearModel
from ..models.tree import Tree


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Start:
    """Aggregator assigns the client its index and starts local training."""

    client_id: int


@dataclass(frozen=True, eq=False)
class LinearParams:
    client_id: int
    intercept: float
    coefficients: np.ndarray
    n: int

    def __post_init__(self):
        object.__setattr__(self, "coefficients", _frozen_array(self.coefficients, np.float64))
        if self.n < 1:
            raise ValueError("n must be positive")


@dataclass(frozen=True, eq=False)
class ForestContribution:
    client_id: int
    trees: tuple[Tree, ...]

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))


@dataclass(frozen=True, eq=False)
class RangeReport:
    client_id: int
    minima: np.ndarray
    maxima: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "minima", _frozen_array(self.minima, np.float64))
        object.__setattr__(self, "maxima", _frozen_array(self.maxima, np.float64))
        if self.minima.shape != self.maxima.shape:
            raise ValueError("minima and maxima must align")


@dataclass(frozen=True, eq=False)
class ThresholdGrid:
    thresholds: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(_frozen_array(t, np.float64) for t in self.thresholds))


@dataclass(frozen=True, eq=False)
class NodeRequest:
    """Ask every client for class-count histograms of one open node."""

    tree_id: int
    node_id: int
    features: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "features", _frozen_array(self.features, np.int64))


@dataclass(frozen=True, eq=False)
class HistogramReport:
    """Class counts of a client's rows at one node.

    ``counts`` stacks one (left_pos, left_neg, right_pos, right_neg) row per
    candidate threshold, feature after feature; ``sizes[j]`` rows belong to
    ``features[j]``.
    """

    client_id: int
    tree_id: int
    node_id: int
    node_neg: int
    node_pos: int
    features: np.ndarray
    counts: np.ndarray
    sizes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "features", _frozen_array(self.features, np.int64))
        object.__setattr__(self, "sizes", _frozen_array(self.sizes, np.int64))
        counts = np.array(self.counts, dtype=np.int64).reshape(-1, 4)
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)
        if self.sizes.shape != self.features.shape or int(self.sizes.sum()) != counts.shape[0]:
            raise ValueError("sizes must give one threshold count per feature")
        if self.node_neg < 0 or self.node_pos < 0 or (counts < 0).any():
            raise ValueError("counts must be non-negative")
        if not (np.all(counts[:, 0] + counts[:, 2] == self.node_pos)
                and np.all(counts[:, 1] + counts[:, 3] == self.node_neg)):
            raise ValueError("left + right counts must equal the node counts")

    def feature_counts(self) -> list[np.ndarray]:
        """Per-feature (q, 4) views."""
        ends = np.cumsum(self.sizes).tolist()
        return [self.counts[a:b] for a, b in zip([0] + ends[:-1], ends)]


@dataclass(frozen=True, eq=False)
class SplitDecision:
    tree_id: int
    node_id: int
    feature_index: int
    threshold: float
    left_id: int
    right_id: int


@dataclass(frozen=True, eq=False)
class MakeLeaf:
    tree_id: int
    node_id: int
    neg: float
    pos: float

    @property
    def class_counts(self) -> tuple[float, float]:
        return self.neg, self.pos


@dataclass(frozen=True, eq=False)
class GlobalModel:
    model: LinearModel | Forest


@dataclass(frozen=True, eq=False)
class Done:
    pass


MESSAGE_TYPES = (Start, LinearParams, ForestContribution, RangeReport, ThresholdGrid, NodeRequest,
                 HistogramReport, SplitDecision, MakeLeaf, GlobalModel, Done)
