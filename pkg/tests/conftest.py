import numpy as np
import pytest

from sgdirichlet.energy import DiscreteFunction


def random_function(level, rng, scale=1.0, zero_boundary=True):
    vals = scale * rng.standard_normal(level.n_vertices)
    if zero_boundary:
        vals[: level.N] = 0.0
    return DiscreteFunction(level, vals, zero_boundary)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
