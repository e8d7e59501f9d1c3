"""Between-group heterogeneity: Scheffé pairwise tests and Cohen's d."""
from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from ..errors import SizeOutOfRange, ZeroVariance
from .special import f_sf


def scheffe_posthoc(groups: Sequence) -> np.ndarray:
    """Symmetric matrix of pairwise Scheffé p-values with a unit diagonal.

    Uses the one-way ANOVA within-group mean square of all groups; the
    pair statistic ``(mean_i - mean_j)^2 / (MSE (1/n_i + 1/n_j) (k - 1))``
    is referred to F(k - 1, N - k). With MSE = 0, pairs with different
    means get p = 0 and equal means p = 1.
    """
    arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    k = len(arrays)
    if k < 2:
        raise SizeOutOfRange("Scheffé needs at least two groups")
    if any(a.shape[0] < 2 for a in arrays):
        raise SizeOutOfRange("Scheffé needs at least two values per group")
    sizes = np.array([a.shape[0] for a in arrays], dtype=np.float64)
    means = np.array([a.mean() for a in arrays])
    n_total = sizes.sum()
    ss_within = sum(float(((a - a.mean()) ** 2).sum()) for a in arrays)
    mse = ss_within / (n_total - k)
    p = np.ones((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            diff = means[i] - means[j]
            if mse == 0:
                pij = 1.0 if diff == 0 else 0.0
            else:
                stat = diff * diff / (mse * (1.0 / sizes[i] + 1.0 / sizes[j]) * (k - 1))
                pij = f_sf(stat, k - 1, n_total - k)
            p[i, j] = p[j, i] = pij
    return p


def cohens_d(a, b) -> float:
    """Standardized mean difference with the (n-1)-weighted pooled SD."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = a.shape[0], b.shape[0]
    if na < 2 or nb < 2:
        raise SizeOutOfRange("Cohen's d needs at least two values per sample")
    pooled = ((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / (na + nb - 2)
    if pooled <= 0:
        raise ZeroVariance("pooled standard deviation is zero")
    return float((a.mean() - b.mean()) / math.sqrt(pooled))
