import numpy as np
import pytest

from curvedbeam.forward import simulate_measurements
from curvedbeam.phantom import build_layout, homogeneous_rectangular, numerical_rectangular


@pytest.fixture(scope="session")
def homogeneous():
    return homogeneous_rectangular()


@pytest.fixture(scope="session")
def rect_layout(homogeneous):
    return build_layout("rectangular", (12, 16), homogeneous.extent, depth_z=1.0)


@pytest.fixture(scope="session")
def homogeneous_ms(homogeneous, rect_layout):
    return simulate_measurements(homogeneous, rect_layout)


@pytest.fixture(scope="session")
def single_inclusion():
    return numerical_rectangular()


@pytest.fixture(scope="session")
def single_inclusion_ms(single_inclusion):
    lay = build_layout("rectangular", (12, 16), single_inclusion.extent, depth_z=1.0)
    return simulate_measurements(single_inclusion, lay)


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
