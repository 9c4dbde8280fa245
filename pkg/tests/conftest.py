from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from hjjunction import FluxLimitedF, Grid, Junction, quadratic

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def p2():
    return quadratic()


def flux_limited(n: int, A: float):
    hs = [quadratic() for _ in range(n)]
    return hs, FluxLimitedF(hs, A)


def grid(n: int, dx: float, imax: int) -> Grid:
    return Grid(Junction(n), dx, imax)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[key])
