"""Aggregator side of the three federated protocols.

Each run follows the same loop: initialize clients, let them train locally,
collect their parameters, aggregate, and broadcast the global model. The
histogram classification forest repeats the collect/aggregate steps once
per tree level until no node is left open.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..dataset import SiteTable
from ..errors import ClientFailure, SchemaMismatch
from ..models.forest import Forest, tree_seed_key
from ..models.histogram import TreeBuilder, candidate_thresholds, choose_split, is_terminal, split_counts
from ..models.linear import LinearModel
from ..rng import node_features
from .client import FedConfig, FederatedClient
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
from .transport import RoundLog, transport


@dataclass
class FederationResult:
    model: LinearModel | Forest
    log: RoundLog
    clients: list[FederatedClient]


class Aggregator:
    """Coordinates one federated run over in-process channels."""

    def __init__(self, tables: Sequence[SiteTable], config: FedConfig, *, threads: int = 1,
                 log: RoundLog | None = None, transport_kind: str = "in_process"):
        if not tables:
            raise ValueError("at least one client is required")
        widths = {t.X.shape[1] for t in tables}
        if len(widths) != 1:
            raise SchemaMismatch(f"clients disagree on the feature count: {sorted(widths)}")
        if len({t.site_id for t in tables}) != len(tables):
            raise ValueError("client site ids must be unique")
        self.config = config
        self.n_features = widths.pop()
        self.threads = threads
        self.log = log if log is not None else RoundLog()
        self.links = []
        self.clients: list[FederatedClient] = []
        # client ids follow sorted site ids so aggregation order is fixed
        for table in sorted(tables, key=lambda t: t.site_id):
            agg_end, client_end = transport(transport_kind, names=("aggregator", f"client:{table.site_id}"),
                                            log=self.log)
            self.links.append(agg_end)
            self.clients.append(FederatedClient(table, config, client_end))
        self.pooled_histograms: dict[tuple[int, int], tuple[np.ndarray, list[np.ndarray]]] | None = None

    @property
    def n_clients(self) -> int:
        return len(self.clients)

    def _run_clients(self) -> None:
        def step(client: FederatedClient):
            try:
                client.step()
            except ClientFailure:
                raise
            except Exception as exc:
                # no dropout tolerance: any client error aborts the run
                raise ClientFailure(client.site_id, f"{type(exc).__name__}: {exc}") from exc

        if self.threads > 1 and self.n_clients > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                for fut in [pool.submit(step, c) for c in self.clients]:
                    fut.result()
        else:
            for client in self.clients:
                step(client)

    def exchange(self, outgoing: Sequence[Sequence]) -> list[list]:
        """One round: send ``outgoing[i]`` to client i, let clients work, collect replies.

        The round completes only once every client has answered.
        """
        self.log.next_round()
        for link, messages in zip(self.links, outgoing):
            for msg in messages:
                link.send(msg)
        self._run_clients()
        replies = [link.drain() for link in self.links]
        for client, msgs in zip(self.clients, replies):
            for msg in msgs:
                cid = getattr(msg, "client_id", None)
                if cid is not None and cid != self.clients.index(client):
                    raise ClientFailure(client.site_id, f"reported as client {cid}")
        return replies

    def broadcast(self, messages: Sequence) -> list[list]:
        return self.exchange([messages] * self.n_clients)

    def finish(self, model, pending: Sequence = ()) -> FederationResult:
        self.log.next_round()
        for link in self.links:
            for msg in pending:
                link.send(msg)
            link.send(GlobalModel(model))
            link.send(Done())
        self._run_clients()
        return FederationResult(model, self.log, self.clients)

    def start(self, expected: type) -> list:
        replies = self.exchange([[Start(i)] for i in range(self.n_clients)])
        out = []
        for client, msgs in zip(self.clients, replies):
            if len(msgs) != 1 or not isinstance(msgs[0], expected):
                raise ClientFailure(client.site_id, f"expected one {expected.__name__}")
            out.append(msgs[0])
        return out

    # -- protocols ---------------------------------------------------------

    def run_linear(self) -> FederationResult:
        params: list[LinearParams] = self.start(LinearParams)
        for p in params:
            if p.coefficients.shape[0] != self.n_features:
                raise SchemaMismatch(f"client {p.client_id} sent {p.coefficients.shape[0]} coefficients")
        total = sum(p.n for p in params)
        weights = [p.n / total for p in params]
        intercept = sum(w * p.intercept for w, p in zip(weights, params))
        coefficients = np.sum([w * p.coefficients for w, p in zip(weights, params)], axis=0)
        return self.finish(LinearModel(intercept, coefficients))

    def run_rf_regression(self) -> FederationResult:
        contributions: list[ForestContribution] = self.start(ForestContribution)
        tpc = self.config.trees_per_client
        trees = []
        for c in contributions:
            if len(c.trees) != tpc:
                raise ClientFailure(self.clients[c.client_id].site_id, f"sent {len(c.trees)} trees, expected {tpc}")
            trees.extend(c.trees)
        keys = tuple(tree_seed_key(self.config.seed, i) for i in range(len(trees)))
        return self.finish(Forest(tuple(trees), "regression", self.n_features, keys))

    def run_rf_classification(self, *, record_histograms: bool = False) -> FederationResult:
        cfg = self.config
        train = cfg.train_config
        m = self.n_features
        k = train.resolve_features(m)
        ranges: list[RangeReport] = self.start(RangeReport)
        for r in ranges:
            if r.minima.shape[0] != m:
                raise SchemaMismatch(f"client {r.client_id} reported {r.minima.shape[0]} feature ranges")
        lo = np.min([r.minima for r in ranges], axis=0)
        hi = np.max([r.maxima for r in ranges], axis=0)
        grid = ThresholdGrid(tuple(candidate_thresholds(lo, hi, cfg.thresholds)))
        thresholds = grid.thresholds
        sizes_of = np.array([t.shape[0] for t in thresholds], dtype=np.int64)
        if record_histograms:
            self.pooled_histograms = {}

        n_trees = self.n_clients * cfg.trees_per_client
        builders = [TreeBuilder() for _ in range(n_trees)]
        for b in builders:
            b.add_node(0, 0.0, 0.0)
        open_nodes = [(t, 0) for t in range(n_trees)]
        outgoing: list = [grid]
        while open_nodes:
            requests = []
            for t, node in open_nodes:
                depth = builders[t].depth[node]
                can_split = train.max_depth is None or depth < train.max_depth
                feats = node_features(cfg.seed, t, node, m, k) if can_split else np.empty(0, dtype=np.int64)
                requests.append(NodeRequest(t, node, feats))
            replies = self.broadcast(outgoing + requests)
            pooled = self._pool(requests, replies, sizes_of)
            outgoing = []
            next_open = []
            for req in requests:
                t, node = req.tree_id, req.node_id
                b = builders[t]
                neg, pos, counts, sizes = pooled[(t, node)]
                b.weight[node] = neg + pos
                b.positives[node] = pos
                if record_histograms:
                    self.pooled_histograms[(t, node)] = (req.features, split_counts(counts, sizes))
                best = None
                if not is_terminal(b.depth[node], neg, pos, train):
                    best = choose_split(neg, pos, req.features, counts, sizes, thresholds, train.min_samples_leaf)
                if best is None:
                    outgoing.append(MakeLeaf(t, node, neg, pos))
                    continue
                f, thr, quad = best
                left, right = b.split(node, f, thr, quad)
                outgoing.append(SplitDecision(t, node, f, thr, left, right))
                for child in (left, right):
                    cneg, cpos = b.counts(child)
                    if is_terminal(b.depth[child], cneg, cpos, train):
                        outgoing.append(MakeLeaf(t, child, cneg, cpos))
                    else:
                        next_open.append((t, child))
            open_nodes = next_open
        forest = Forest(tuple(b.build() for b in builders), "classification", m)
        return self.finish(forest, pending=outgoing)

    def _pool(self, requests: list[NodeRequest], replies: list[list], sizes_of) -> dict:
        """Sum every client's class counts per (node, feature, threshold)."""
        pooled = {}
        wanted = [(r.tree_id, r.node_id) for r in requests]
        for client, msgs in zip(self.clients, replies):
            got = [(m.tree_id, m.node_id) for m in msgs if isinstance(m, HistogramReport)]
            if got != wanted or len(msgs) != len(wanted):
                raise ClientFailure(client.site_id, "histogram reports do not match the requested nodes")
        for i, req in enumerate(requests):
            reports = [msgs[i] for msgs in replies]
            expected = sizes_of[req.features]
            for client, r in zip(self.clients, reports):
                if not (np.array_equal(r.features, req.features) and np.array_equal(r.sizes, expected)):
                    raise ClientFailure(client.site_id, "histogram does not match the candidate grid")
            neg = float(sum(r.node_neg for r in reports))
            pos = float(sum(r.node_pos for r in reports))
            counts = reports[0].counts.copy()
            for r in reports[1:]:
                counts += r.counts
            pooled[(req.tree_id, req.node_id)] = (neg, pos, counts, expected)
        return pooled
