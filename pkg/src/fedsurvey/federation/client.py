from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..dataset import SiteTable
from ..errors import InvalidConfig
from ..models.forest import TrainConfig, fit_forest
from ..models.histogram import flatten_grid, hist_bootstrap, node_histogram
from ..models.linear import fit_ols
from .messages import (
    Done,
    ForestContribution,
    GlobalModel,
    HistogramReport,
    LinearParams,
    MakeLeaf,
    NodeRequest,
    RangeReport,
    SplitDecision,
    Start,
    ThresholdGrid,
)
from .transport import Endpoint

ALGORITHMS = ("fed_linear", "fed_rf_regression", "fed_rf_classification")


@dataclass(frozen=True)
class FedConfig:
    algorithm: str = "fed_linear"
    trees_per_client: int = 20
    thresholds: int = 32
    model: TrainConfig = TrainConfig()
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise InvalidConfig(f"unknown federated algorithm {self.algorithm!r}")
        if self.trees_per_client < 1:
            raise InvalidConfig("trees_per_client must be >= 1")
        if self.algorithm == "fed_rf_classification" and self.thresholds < 2:
            raise InvalidConfig("fed_rf_classification needs at least 2 candidate thresholds")

    @property
    def train_config(self) -> TrainConfig:
        """Model hyperparameters with the federation seed."""
        return replace(self.model, seed=self.seed)


class FederatedClient:
    """A data-holding site.

    Holds its training rows privately and answers aggregator messages with
    parameters or counts. The object itself is never serialized.
    """

    def __init__(self, table: SiteTable, config: FedConfig, endpoint: Endpoint):
        self.site_id = table.site_id
        self._X = table.X
        self._y = table.y
        self.config = config
        self.endpoint = endpoint
        self.client_id: int | None = None
        self.thresholds: tuple[np.ndarray, ...] | None = None
        self._grid = None
        self.model = None
        self.done = False
        self.round = 0
        self._members: dict[tuple[int, int], np.ndarray] = {}

    def __getstate__(self):
        raise TypeError("client state must not be serialized")

    @property
    def n(self) -> int:
        return self._X.shape[0]

    def step(self) -> None:
        """Handle every pending message and send the replies."""
        self.round += 1
        for msg in self.endpoint.drain():
            for reply in self.handle(msg):
                self.endpoint.send(reply)

    def handle(self, msg) -> list:
        if isinstance(msg, Start):
            self.client_id = msg.client_id
            return [self._local_training()]
        if isinstance(msg, ThresholdGrid):
            self.thresholds = msg.thresholds
            self._grid = flatten_grid(msg.thresholds)
            return []
        if isinstance(msg, NodeRequest):
            return [self._histogram(msg)]
        if isinstance(msg, SplitDecision):
            rows = self._members.pop((msg.tree_id, msg.node_id))
            goes_left = self._X[rows, msg.feature_index] <= msg.threshold
            self._members[(msg.tree_id, msg.left_id)] = rows[goes_left]
            self._members[(msg.tree_id, msg.right_id)] = rows[~goes_left]
            return []
        if isinstance(msg, MakeLeaf):
            self._members.pop((msg.tree_id, msg.node_id), None)
            return []
        if isinstance(msg, GlobalModel):
            self.model = msg.model
            return []
        if isinstance(msg, Done):
            self.done = True
            return []
        raise TypeError(f"client cannot handle {type(msg).__name__}")

    def _local_training(self):
        cfg = self.config
        if cfg.algorithm == "fed_linear":
            local = fit_ols(self._X, self._y, cfg.model.ridge_jitter)
            return LinearParams(self.client_id, local.intercept, local.coefficients, self.n)
        if cfg.algorithm == "fed_rf_regression":
            tpc = cfg.trees_per_client
            forest = fit_forest(self._X, self._y, replace(cfg.train_config, n_trees=tpc), "regression",
                                first_tree=self.client_id * tpc)
            return ForestContribution(self.client_id, forest.trees)
        return RangeReport(self.client_id, self._X.min(axis=0), self._X.max(axis=0))

    def _histogram(self, req: NodeRequest) -> HistogramReport:
        key = (req.tree_id, req.node_id)
        if req.node_id == 0 and key not in self._members:
            self._members[key] = hist_bootstrap(self.config.seed, self.site_id, req.tree_id, self.n)
        rows = self._members[key]
        pos = int((self._y[rows] == 1).sum())
        counts, sizes = node_histogram(self._X, self._y, rows, req.features, self._grid)
        return HistogramReport(self.client_id, req.tree_id, req.node_id, rows.shape[0] - pos, pos,
                               req.features, counts, sizes)
