import math

import numpy as np
import pytest

from vpsplit import build_cubic_stokes, build_laurent, build_quadratic_stokes, build_scheme

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark and rep.when == "call":
        # parametrized criteria pass only if every case passes
        title, outcome, dur = _CRITERIA.get(mark.args[0], (mark.args[1], "PASSED", 0.0))
        if rep.outcome != "passed":
            outcome = rep.outcome.upper()
        _CRITERIA[mark.args[0]] = (title, outcome, dur + rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, outcome, dur = _CRITERIA[num]
        terminalreporter.write_line(f"C{num:<3d}{outcome:<8s}{dur:7.2f}s  {title}")


@pytest.fixture(scope="session")
def quad():
    return build_quadratic_stokes(0.1)


@pytest.fixture(scope="session")
def cubic():
    return build_cubic_stokes(1.0, 1.5, 0.275 * math.pi)


@pytest.fixture(scope="session")
def laurent():
    return build_laurent()


@pytest.fixture(scope="session")
def fields(quad, cubic, laurent):
    return {"quad_stokes": quad, "cubic_stokes": cubic, "laurent": laurent}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def schemes(fields):
    return {(name, order): build_scheme(f, order) for name, f in fields.items() for order in (1, 2)}
