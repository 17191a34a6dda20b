import numpy as np
import pytest
from hypothesis import settings

from tentlab.coefficients import make_coefficient_field
from tentlab.geometry import build_grid, build_time_grid
from tentlab.operator import assemble_operator
from tentlab.propagator import propagator_for

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def heat128():
    """A = I on N=128 with a cache aligned to a mesh on [1e-3, 0.25]."""
    grid = build_grid(1, 128)
    op = assemble_operator(make_coefficient_field(grid, "identity"))
    cache, tg = propagator_for(op, build_time_grid(1e-3, 0.25))
    return op, cache, tg


@pytest.fixture(scope="session")
def complex128():
    grid = build_grid(1, 128)
    op = assemble_operator(make_coefficient_field(grid, "complex_perturbation", {"eps": 0.3}, seed=3))
    cache, tg = propagator_for(op, build_time_grid(1e-3, 0.25))
    return op, cache, tg


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
