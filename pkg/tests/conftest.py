import numpy as np
import pytest

from torus_atlas.action_angle import ChartSpec
from torus_atlas.diophantine import DiophantineParams

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def reference_chart():
    return ChartSpec(1, (0.15, 0.35), (0.3, 0.7))


@pytest.fixture(scope="session")
def neighbour_chart():
    return ChartSpec(2, (0.25, 0.45), (0.3, 0.7), phase=(0.3, -0.2))


@pytest.fixture(scope="session")
def params():
    return DiophantineParams(1e-3, 1.5, 200)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
