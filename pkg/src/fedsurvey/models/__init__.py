"""Local learners: least squares, CART trees and bagged forests."""
from .forest import Forest, TrainConfig, fit_forest, predict, predict_proba
from .histogram import candidate_thresholds, fit_histogram_forest
from .linear import LinearModel, fit_ols
from .serialize import dumps, loads
from .tree import Tree

__all__ = [
    "Forest", "LinearModel", "TrainConfig", "Tree",
    "candidate_thresholds", "dumps", "fit_forest", "fit_histogram_forest",
    "fit_ols", "loads", "predict", "predict_proba",
]
