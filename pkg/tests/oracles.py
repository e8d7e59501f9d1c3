"""Brute-force oracles shared by the unit and acceptance tests."""
import itertools

import numpy as np

from fedsurvey.dataset import SiteTable
from fedsurvey.federation import FedConfig, run_federated_rf_classification
from fedsurvey.models import TrainConfig, candidate_thresholds
from fedsurvey.models.histogram import hist_bootstrap


def brute_auroc(y, s):
    pos = [v for v, t in zip(s, y) if t == 1]
    neg = [v for v, t in zip(s, y) if t == 0]
    total = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return total / (len(pos) * len(neg))


def brute_counts(X, y, rows, f, thr):
    x = X[rows, f]
    yy = y[rows]
    left = x <= thr
    return [int((left & (yy == 1)).sum()), int((left & (yy == 0)).sum()),
            int((~left & (yy == 1)).sum()), int((~left & (yy == 0)).sum())]


def random_histogram_instance(seed, n_clients, m, max_rows=60):
    """Small rounded (tie-heavy) binary instance split across clients."""
    rng = np.random.default_rng(seed)
    sizes = rng.integers(4, max_rows // n_clients + 1, size=n_clients)
    tables = []
    for i, n in enumerate(sizes):
        X = np.round(rng.normal(size=(n, m)), 1)
        y = (rng.random(n) < 0.5).astype(float)
        tables.append(SiteTable(f"c{i}", X, y))
    cfg = FedConfig("fed_rf_classification", trees_per_client=1, thresholds=6,
                    model=TrainConfig(min_samples_leaf=1, features_per_split=m), seed=seed)
    return tables, cfg


def check_additivity(tables, cfg):
    """Assert every pooled quadruple equals a brute-force count over the rows routed to its node.

    Returns the number of quadruples checked.
    """
    result = run_federated_rf_classification(tables, cfg, record_histograms=True)
    ordered = sorted(tables, key=lambda t: t.site_id)
    X = np.vstack([t.X for t in ordered])
    y = np.concatenate([t.y for t in ordered])
    grid = candidate_thresholds(X.min(axis=0), X.max(axis=0), cfg.thresholds)
    offsets = np.cumsum([0] + [t.n for t in ordered])
    checked = 0
    for tree_id, tree in enumerate(result.model.trees):
        # pooled rows, with bootstrap multiplicity, reaching each node
        root = np.concatenate([offsets[i] + hist_bootstrap(cfg.seed, t.site_id, tree_id, t.n)
                               for i, t in enumerate(ordered)])
        members = {0: root}
        for node in range(tree.n_nodes):
            rows = members.pop(node)
            if (tree_id, node) in result.pooled_histograms:
                features, hists = result.pooled_histograms[(tree_id, node)]
                for f, counts in zip(features, hists):
                    for qi, thr in enumerate(grid[f]):
                        assert counts[qi].tolist() == brute_counts(X, y, rows, f, thr)
                        checked += 1
            if tree.feature[node] >= 0:
                go = X[rows, tree.feature[node]] <= tree.threshold[node]
                members[tree.left[node]] = rows[go]
                members[tree.right[node]] = rows[~go]
    return checked
