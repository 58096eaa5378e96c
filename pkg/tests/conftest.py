import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def three_points():
    """Three-point set with reference (5, 4) used by several golden values."""
    return np.array([[1.0, 3.5], [2.0, 2.5], [3.0, 1.5]]), np.array([5.0, 4.0])


def random_front(rng, n, m=2):
    """``n`` mutually nondominated points in the unit box (two objectives)."""
    if m != 2:
        raise ValueError
    x = np.sort(rng.uniform(0.02, 0.98, n))
    y = np.sort(rng.uniform(0.02, 0.98, n))[::-1]
    return np.column_stack([x, y])


# one pass/fail line per acceptance criterion, printed after the run
_CRITERIA: dict[int, bool] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    if report.when == "call" or (report.when == "setup" and report.failed):
        _CRITERIA[n] = _CRITERIA.get(n, True) and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if _CRITERIA[n] else 'FAIL'}")
