import numpy as np
import pytest

from dynpat.grid import Grid2D
from dynpat.wave import WaveOperator


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_grid():
    return Grid2D(nx=16, ny=16, n_tau=64, damping_width=0)


@pytest.fixture(scope="session")
def small_op(small_grid):
    return WaveOperator(small_grid, n_sensors=8)


def translating_blob(n=24, T=3, shift=1.0, width=4.0, center=(10.0, 12.0)):
    """Gaussian blob moving ``shift`` pixels per frame along +x."""
    yy, xx = np.mgrid[0:n, 0:n]
    return np.stack([np.exp(-((xx - center[0] - shift * t) ** 2 + (yy - center[1]) ** 2)
                            / (2 * width ** 2)) for t in range(T)])
