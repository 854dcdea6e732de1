import numpy as np
import pytest

from shelab.grids import DomainKind, DomainSetup, Grid1D, TimeGrid
from shelab.noise import sample_noise, simulate_convolution


@pytest.fixture(scope="session")
def periodic_grid():
    return Grid1D(DomainSetup(DomainKind.PERIODIC_UNIT), 64)


@pytest.fixture(scope="session")
def neumann_grid():
    return Grid1D(DomainSetup(DomainKind.NEUMANN_UNIT), 64)


@pytest.fixture(scope="session")
def line_grid():
    return Grid1D(DomainSetup(DomainKind.WHOLE_LINE, torus_width=16.0), 256)


@pytest.fixture(scope="session")
def tgrid():
    return TimeGrid(64, 1.0)


@pytest.fixture(scope="session")
def periodic_conv(periodic_grid, tgrid):
    return simulate_convolution(sample_noise(periodic_grid, tgrid, 424242, 0))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
