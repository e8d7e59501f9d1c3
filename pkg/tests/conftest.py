import json
from pathlib import Path

import numpy as np
import pytest

from fedsurvey.dataset import SiteTable

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def stats_reference():
    return json.loads((FIXTURES / "stats_reference.json").read_text())


def make_sites(sizes, m=4, seed=0, task="regression", shifts=None):
    """Small multi-site tables with a linear signal."""
    rng = np.random.default_rng(seed)
    beta = rng.normal(size=m)
    tables = []
    for i, n in enumerate(sizes):
        shift = 0.0 if shifts is None else shifts[i]
        X = rng.normal(size=(n, m)) + shift
        latent = X @ beta + rng.normal(scale=0.5, size=n)
        y = (latent > np.median(latent)).astype(float) if task == "classification" else latent
        tables.append(SiteTable(f"s{i}", X, y))
    return tables


@pytest.fixture
def regression_sites():
    return make_sites([80, 60, 40], m=4, seed=1)


@pytest.fixture
def classification_sites():
    return make_sites([70, 50, 40], m=4, seed=2, task="classification")


# -- acceptance report: one PASS/FAIL line per criterion ----------------------

_CRITERIA: dict[int, tuple[str, str, float]] = {}
_SETUP_SECONDS: dict[str, float] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when == "teardown":
        return
    number, title = marker.args
    if report.when == "setup" and report.passed:
        _SETUP_SECONDS[item.nodeid] = report.duration
        return
    status = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"
    # module fixtures (shared experiment runs) are billed to the first test using them
    _CRITERIA[number] = (title, status, report.duration + _SETUP_SECONDS.get(item.nodeid, 0.0))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, seconds = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title}  ({seconds:.1f} s)")
