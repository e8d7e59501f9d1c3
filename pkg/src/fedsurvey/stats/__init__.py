"""Hypothesis tests, post-hoc heterogeneity analysis and effect sizes."""
from .decision import HypothesisReport, SampleTriple, choose_test, decide_and_test
from .inference import bartlett, shapiro_wilk, t_test_one_sided
from .posthoc import cohens_d, scheffe_posthoc

__all__ = [
    "HypothesisReport", "SampleTriple", "bartlett", "choose_test", "cohens_d",
    "decide_and_test", "scheffe_posthoc", "shapiro_wilk", "t_test_one_sided",
]
