"""Client/aggregator federation for linear models and random forests."""
from __future__ import annotations

from typing import Sequence

from ..dataset import SiteTable
from .aggregator import Aggregator, FederationResult
from .client import ALGORITHMS, FedConfig, FederatedClient
from .messages import MESSAGE_TYPES
from .transport import RoundLog, transport
from .wire import decode_frame, encode_frame


def run_federated_linear(clients: Sequence[SiteTable], config: FedConfig | None = None, *,
                         threads: int = 1, log: RoundLog | None = None) -> FederationResult:
    """One round of sample-size-weighted parameter averaging of local OLS fits."""
    config = config or FedConfig("fed_linear")
    return Aggregator(clients, config, threads=threads, log=log).run_linear()


def run_federated_rf_regression(clients: Sequence[SiteTable], config: FedConfig, *,
                                threads: int = 1, log: RoundLog | None = None) -> FederationResult:
    """One round: every client grows ``trees_per_client`` trees; the aggregator pools them."""
    return Aggregator(clients, config, threads=threads, log=log).run_rf_regression()


def run_federated_rf_classification(clients: Sequence[SiteTable], config: FedConfig, *,
                                    threads: int = 1, log: RoundLog | None = None,
                                    record_histograms: bool = False) -> FederationResult:
    """Level-by-level histogram forest grown from pooled class counts."""
    agg = Aggregator(clients, config, threads=threads, log=log)
    result = agg.run_rf_classification(record_histograms=record_histograms)
    result.pooled_histograms = agg.pooled_histograms
    return result


__all__ = [
    "ALGORITHMS", "Aggregator", "FedConfig", "FederatedClient", "FederationResult", "MESSAGE_TYPES",
    "RoundLog", "decode_frame", "encode_frame", "run_federated_linear",
    "run_federated_rf_classification", "run_federated_rf_regression", "transport",
]
