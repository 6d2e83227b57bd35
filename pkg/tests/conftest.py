import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from entropic_jko import GridMeasure, apply_heat, make_grid, wrapped_gaussian


@pytest.fixture
def grid64():
    return make_grid(1, 64)


@pytest.fixture
def grid256():
    return make_grid(1, 256)


def positive_bump(grid, center=0.5, width=0.1, floor=0.02, seed=None):
    """Wrapped Gaussian mixed with a uniform floor; strictly positive, mean 1."""
    bump = wrapped_gaussian(grid, (center,) * grid.d, width)
    return GridMeasure.from_values(grid, (1.0 - floor) * bump.rho + floor)


def random_positive_measure(grid, rng, low=0.2):
    return GridMeasure.from_values(grid, low + rng.random(grid.N))


def smoothed_plateau(grid, center, width, smooth=3e-3, floor=1e-9):
    """Heat-mollified indicator bump; localized with tiny positive tails."""
    x = grid.axis_nodes
    ind = (np.abs(((x - center + 0.5) % 1.0) - 0.5) <= width / 2).astype(float)
    sm = apply_heat(grid, smooth**2, ind)
    return GridMeasure.from_values(grid, sm + floor)
