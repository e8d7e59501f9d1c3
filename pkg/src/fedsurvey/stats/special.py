"""Distribution functions built on the regularized incomplete beta and gamma.

The incomplete beta/gamma kernels and the normal CDF come from
``scipy.special``; the distribution functions are expressed through them
here so upper tails are computed directly rather than as ``1 - cdf``.
"""
import math

import numpy as np
from scipy import special as _sp

from ..errors import DomainError


def _check(cond: bool, message: str) -> None:
    if not cond:
        raise DomainError(message)


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    _check(a > 0 and b > 0, f"betainc needs a, b > 0 (got {a}, {b})")
    _check(0.0 <= x <= 1.0, f"betainc needs 0 <= x <= 1 (got {x})")
    return float(_sp.betainc(a, b, x))


def gammainc(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    _check(a > 0 and x >= 0, f"gammainc needs a > 0, x >= 0 (got {a}, {x})")
    return float(_sp.gammainc(a, x))


def gammaincc(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x)."""
    _check(a > 0 and x >= 0, f"gammaincc needs a > 0, x >= 0 (got {a}, {x})")
    return float(_sp.gammaincc(a, x))


def norm_cdf(x: float) -> float:
    _check(not math.isnan(x), "norm_cdf of NaN")
    return float(_sp.ndtr(x))


def norm_sf(x: float) -> float:
    return norm_cdf(-x)


def norm_ppf(p: float) -> float:
    _check(0.0 < p < 1.0, f"norm_ppf needs 0 < p < 1 (got {p})")
    return float(_sp.ndtri(p))


def t_sf(t: float, df: float) -> float:
    """P(T > t) for Student's t with ``df`` degrees of freedom."""
    _check(df > 0, f"t distribution needs df > 0 (got {df})")
    _check(not math.isnan(t), "t_sf of NaN")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    tail = 0.5 * betainc(df / 2.0, 0.5, df / (df + t * t))
    return tail if t >= 0 else 1.0 - tail


def t_cdf(t: float, df: float) -> float:
    return t_sf(-t, df)


def f_sf(x: float, d1: float, d2: float) -> float:
    """Upper tail of the F(d1, d2) distribution."""
    _check(d1 > 0 and d2 > 0, f"F distribution needs positive df (got {d1}, {d2})")
    if x <= 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    return betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x))


def f_cdf(x: float, d1: float, d2: float) -> float:
    _check(d1 > 0 and d2 > 0, f"F distribution needs positive df (got {d1}, {d2})")
    if x <= 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    return betainc(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2))


def chi2_sf(x: float, k: float) -> float:
    _check(k > 0, f"chi-square needs k > 0 (got {k})")
    if x <= 0:
        return 1.0
    return gammaincc(k / 2.0, x / 2.0)


def chi2_cdf(x: float, k: float) -> float:
    _check(k > 0, f"chi-square needs k > 0 (got {k})")
    if x <= 0:
        return 0.0
    return gammainc(k / 2.0, x / 2.0)


def clip_p(p: float) -> float:
    return float(np.clip(p, 0.0, 1.0))
