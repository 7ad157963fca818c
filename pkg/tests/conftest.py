import numpy as np
import pytest

from kinwave.collision import assemble_linearized
from kinwave.gas import FluidTriple
from kinwave.riemann import generate_states
from kinwave.velocity import grid_for_state


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture(scope="session")
def base_state():
    return FluidTriple(v=1.0, u=(0.25, 0.0, -0.1), theta=1.1)


@pytest.fixture(scope="session")
def small_grid(base_state):
    return grid_for_state(base_state, counts=(12, 12, 12), extent_radii=6.0)


@pytest.fixture(scope="session")
def operator(base_state, small_grid):
    return assemble_linearized(base_state, small_grid)


@pytest.fixture(scope="session")
def decomp():
    right = FluidTriple(v=1.0, u=(0.0, 0.0, 0.0), theta=1.0)
    return generate_states(right, 0.08, 0.05, 0.08)
