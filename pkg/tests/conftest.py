import numpy as np
import pytest

from spmlab import NoiseFamily, NoiseMode, Nonlinearity, PeriodicGrid, SolverConfig, bump_field


@pytest.fixture
def nl2():
    return Nonlinearity(2.0, 2.0)


@pytest.fixture
def g_sin():
    return NoiseFamily([NoiseMode("sinusoidal", amp=0.3)], K=2.0)


@pytest.fixture
def grid128():
    return PeriodicGrid(1, 128)


@pytest.fixture
def bump128(grid128):
    return bump_field(grid128)


@pytest.fixture
def cfg():
    return SolverConfig(dt=1e-3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from tests.test_acceptance import RESULTS
    except ImportError:
        try:
            from test_acceptance import RESULTS
        except ImportError:
            return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
