import numpy as np
import pytest

from cfemf.pipeline import build_snapshot, system_preset
from cfemf.scenario import SystemConfig


@pytest.fixture(scope="session")
def small_cfg():
    return system_preset("small")


@pytest.fixture(scope="session")
def default_cfg():
    return SystemConfig()


@pytest.fixture(scope="session")
def small_snapshot(small_cfg):
    return build_snapshot(small_cfg, 1234)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# pass/fail lines recorded by the acceptance suite, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
