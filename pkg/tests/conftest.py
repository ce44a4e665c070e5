import numpy as np
import pytest

from sgtomo.spin import SpinSystem
from sgtomo.tomography import default_axis_set


@pytest.fixture(scope="session")
def spin4():
    return SpinSystem(8)


@pytest.fixture(scope="session")
def axes4(spin4):
    return default_axis_set(spin4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[number])
