from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from ..errors import DegenerateDesign, DimensionMismatch


@dataclass(frozen=True, eq=False)
class LinearModel:
    intercept: float
    coefficients: np.ndarray
    ridge: bool = False

    def __post_init__(self):
        coef = np.array(self.coefficients, dtype=np.float64).reshape(-1)
        if not (np.isfinite(coef).all() and np.isfinite(self.intercept)):
            raise ValueError("linear model parameters must be finite")
        coef.flags.writeable = False
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def n_features(self) -> int:
        return self.coefficients.shape[0]

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got shape {X.shape}")
        return X @ self.coefficients + self.intercept


def fit_ols(X, y, jitter: float = 1e-8) -> LinearModel:
    """Least squares with intercept via Householder QR.

    A rank-deficient design is re-solved with a ridge penalty ``jitter`` on
    the slopes (the intercept stays unpenalized) and flagged ``ridge=True``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DimensionMismatch(f"X {X.shape} and y {y.shape} do not align")
    if jitter < 0:
        raise ValueError("jitter must be non-negative")
    n, m = X.shape
    A = np.column_stack([np.ones(n), X])
    if n >= m + 1:
        q, r = np.linalg.qr(A)
        diag = np.abs(np.diag(r))
        tol = diag.max() * max(A.shape) * np.finfo(np.float64).eps
        if diag.min() > tol:
            beta = _back_substitute(r, q.T @ y)
            return LinearModel(beta[0], beta[1:])
    if jitter == 0:
        raise DegenerateDesign(f"design of shape {X.shape} is rank-deficient and jitter is 0")
    penalty = np.hstack([np.zeros((m, 1)), np.sqrt(jitter) * np.eye(m)])
    A_aug = np.vstack([A, penalty])
    y_aug = np.concatenate([y, np.zeros(m)])
    q, r = np.linalg.qr(A_aug)
    beta = _back_substitute(r, q.T @ y_aug)
    return LinearModel(beta[0], beta[1:], ridge=True)


def _back_substitute(r: np.ndarray, b: np.ndarray) -> np.ndarray:
    return solve_triangular(r, b, lower=False)
