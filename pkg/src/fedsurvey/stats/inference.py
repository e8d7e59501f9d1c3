"""Shapiro-Wilk, Bartlett and one-sided t-tests."""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from ..errors import ConstantSample, SizeOutOfRange, ZeroVariance
from .special import chi2_sf, norm_ppf, norm_sf, t_cdf, t_sf

# Royston (1995) polynomial coefficients, lowest order first.
_C1 = (0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.544, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


class ShapiroResult(NamedTuple):
    W: float
    p: float


class TestResult(NamedTuple):
    statistic: float
    p: float


class TTestResult(NamedTuple):
    t: float
    df: float
    p: float


def _poly(coefs, x: float) -> float:
    return sum(c * x ** i for i, c in enumerate(coefs))


def _shapiro_weights(n: int) -> np.ndarray:
    """Upper-half Shapiro-Wilk coefficients a_1..a_{n//2} (AS R94)."""
    if n == 3:
        return np.array([math.sqrt(0.5)])
    half = n // 2
    m = np.array([norm_ppf((i - 0.375) / (n + 0.25)) for i in range(1, half + 1)])
    summ2 = 2.0 * float(np.sum(m * m))
    ssumm2 = math.sqrt(summ2)
    rsn = 1.0 / math.sqrt(n)
    a = -m / ssumm2
    a1 = _poly(_C1, rsn) - m[0] / ssumm2
    if n > 5:
        a2 = -m[1] / ssumm2 + _poly(_C2, rsn)
        fac = math.sqrt((summ2 - 2.0 * m[0] ** 2 - 2.0 * m[1] ** 2) / (1.0 - 2.0 * a1 ** 2 - 2.0 * a2 ** 2))
        a = -m / fac
        a[1] = a2
    else:
        fac = math.sqrt((summ2 - 2.0 * m[0] ** 2) / (1.0 - 2.0 * a1 ** 2))
        a = -m / fac
    a[0] = a1
    return a


def shapiro_wilk(x) -> ShapiroResult:
    """Shapiro-Wilk W and its p-value via Royston's AS R94 approximation."""
    x = np.sort(np.asarray(x, dtype=np.float64))
    n = x.shape[0]
    if not 3 <= n <= 5000:
        raise SizeOutOfRange(f"Shapiro-Wilk needs 3 <= n <= 5000, got {n}")
    rng = x[-1] - x[0]
    if not rng > 0 or rng < 1e-19 * max(abs(x[0]), abs(x[-1]), 1e-300):
        raise ConstantSample("all values are identical")
    a = _shapiro_weights(n)
    xs = x / rng
    half = a.shape[0]
    numerator = float(np.dot(a, xs[::-1][:half] - xs[:half])) ** 2
    centred = xs - xs.mean()
    W = numerator / float(np.dot(centred, centred))
    W = min(W, 1.0)
    if n == 3:
        pw = 6.0 / math.pi * (math.asin(math.sqrt(W)) - math.asin(math.sqrt(0.75)))
        return ShapiroResult(W, float(np.clip(pw, 0.0, 1.0)))
    w1 = math.log1p(-W) if W < 1.0 else -math.inf
    if n <= 11:
        gamma = _poly(_G, n)
        if w1 >= gamma:
            return ShapiroResult(W, 1e-99)
        y = -math.log(gamma - w1)
        mean = _poly(_C3, n)
        sd = math.exp(_poly(_C4, n))
    else:
        logn = math.log(n)
        y = w1
        mean = _poly(_C5, logn)
        sd = math.exp(_poly(_C6, logn))
    if math.isinf(y):
        return ShapiroResult(W, 1.0)
    return ShapiroResult(W, norm_sf((y - mean) / sd))


def bartlett(x, y) -> TestResult:
    """Two-group Bartlett test for equal variances; p from the chi-square(1) tail."""
    groups = [np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)]
    for g in groups:
        if g.shape[0] < 2:
            raise SizeOutOfRange("Bartlett needs at least two values per group")
    variances = [float(np.var(g, ddof=1)) for g in groups]
    if min(variances) <= 0:
        raise ZeroVariance("Bartlett needs positive variances")
    dofs = [g.shape[0] - 1 for g in groups]
    total_dof = sum(dofs)
    pooled = sum(d * v for d, v in zip(dofs, variances)) / total_dof
    numerator = total_dof * math.log(pooled) - sum(d * math.log(v) for d, v in zip(dofs, variances))
    correction = 1.0 + (sum(1.0 / d for d in dofs) - 1.0 / total_dof) / 3.0
    stat = max(numerator / correction, 0.0)
    return TestResult(stat, chi2_sf(stat, 1.0))


def t_test_one_sided(a, b, variant: str = "student", alternative: str = "a_greater") -> TTestResult:
    """One-sided two-sample t-test (pooled Student or Welch-Satterthwaite).

    Two samples that are both constant with equal means give t = 0 and
    p = 0.5; constant samples with different means raise ZeroVariance.
    """
    if variant not in ("student", "welch"):
        raise ValueError(f"unknown variant {variant!r}")
    if alternative not in ("a_greater", "a_less"):
        raise ValueError(f"unknown alternative {alternative!r}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = a.shape[0], b.shape[0]
    if na < 2 or nb < 2:
        raise SizeOutOfRange("t-test needs at least two values per sample")
    ma, mb = float(a.mean()), float(b.mean())
    va, vb = float(a.var(ddof=1)), float(b.var(ddof=1))
    if va == 0 and vb == 0:
        if ma != mb:
            raise ZeroVariance("both samples are constant with different means")
        return TTestResult(0.0, float(na + nb - 2), 0.5)
    if variant == "student":
        df = float(na + nb - 2)
        pooled = ((na - 1) * va + (nb - 1) * vb) / df
        se = math.sqrt(pooled * (1.0 / na + 1.0 / nb))
    else:
        qa, qb = va / na, vb / nb
        se = math.sqrt(qa + qb)
        df = (qa + qb) ** 2 / (qa * qa / (na - 1) + qb * qb / (nb - 1))
    t = (ma - mb) / se
    p = t_sf(t, df) if alternative == "a_greater" else t_cdf(t, df)
    return TTestResult(t, df, p)
