import numpy as np
import pytest

from smoothed2opt import kernels


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    """Route the public kernel wrappers through one flavour for the test."""
    table = kernels.NUMBA if request.param == "numba" else kernels.NUMPY
    monkeypatch.setattr(kernels, "_impl", table)
    return request.param


@pytest.fixture
def square():
    """Unit square corners in the order (0,0), (1,1), (0,1), (1,0): the crossed tour."""
    return np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance criterion lines at the end of the run."""
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
