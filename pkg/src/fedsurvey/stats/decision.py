"""Gated choice between Student's and Welch's t-test for L / C / F comparisons.

L is the per-fold average of the local models, C the centralized and F the
federated model. For each pair the pooled Student test is used only when
both Shapiro p-values and the pair's Bartlett p-value exceed 0.05.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import StatsError
from .inference import bartlett, shapiro_wilk, t_test_one_sided

ALPHA = 0.05
GATE = 0.05
POLARITIES = ("higher_better", "lower_better")


@dataclass(frozen=True)
class SampleTriple:
    local: np.ndarray
    centralized: np.ndarray
    federated: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(v, dtype=np.float64) for v in (self.local, self.centralized, self.federated)]
        if len({a.shape[0] for a in arrays}) != 1 or arrays[0].shape[0] < 3:
            raise ValueError("L, C and F must have equal length >= 3")
        if not all(np.isfinite(a).all() for a in arrays):
            raise ValueError("L, C and F must be finite")
        object.__setattr__(self, "local", arrays[0])
        object.__setattr__(self, "centralized", arrays[1])
        object.__setattr__(self, "federated", arrays[2])


@dataclass(frozen=True)
class HypothesisReport:
    comparison: str        # e.g. "C>L" or "F<L"
    test_used: str         # "student" or "welch"
    shapiro_p: tuple[float, float]
    bartlett_p: float
    t_statistic: float
    df: float
    one_sided_p: float

    @property
    def significant(self) -> bool:
        return self.one_sided_p < ALPHA


def _gate_p(func, *samples) -> float:
    # A sample the gate cannot be computed on (e.g. constant) fails the gate.
    try:
        return func(*samples).p
    except StatsError:
        return math.nan


def choose_test(shapiro_a: float, shapiro_b: float, bartlett_p: float) -> str:
    passed = shapiro_a > GATE and shapiro_b > GATE and bartlett_p > GATE
    return "student" if passed else "welch"


def decide_and_test(triple: SampleTriple, polarity: str = "higher_better") -> list[HypothesisReport]:
    """Reports for C vs L, F vs L and C vs F, in that order."""
    if polarity not in POLARITIES:
        raise ValueError(f"unknown polarity {polarity!r}")
    samples = {"L": triple.local, "C": triple.centralized, "F": triple.federated}
    normality = {name: _gate_p(shapiro_wilk, values) for name, values in samples.items()}
    op, alternative = (">", "a_greater") if polarity == "higher_better" else ("<", "a_less")
    reports = []
    for a, b in (("C", "L"), ("F", "L"), ("C", "F")):
        equal_var = _gate_p(bartlett, samples[a], samples[b])
        variant = choose_test(normality[a], normality[b], equal_var)
        res = t_test_one_sided(samples[a], samples[b], variant, alternative)
        reports.append(HypothesisReport(f"{a}{op}{b}", variant, (normality[a], normality[b]),
                                        equal_var, res.t, res.df, res.p))
    return reports
