"""Probability densities on the grid and the named initial-condition presets."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, GridMismatchError
from .torus_grid import Grid, _image_sum_log

log = logging.getLogger(__name__)

Array = np.ndarray


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Nonnegative density w.r.t. the normalized Lebesgue measure, mean exactly 1."""

    grid: Grid
    rho: Array

    @classmethod
    def from_values(cls, grid: Grid, values, *, normalize: bool = True) -> "GridMeasure":
        v = np.asarray(values, dtype=float).reshape(-1)
        if v.size != grid.N:
            raise GridMismatchError(f"density of size {v.size} on a grid with N={grid.N}")
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("density contains NaN or Inf")
        if v.min() < 0.0:
            raise ConfigurationError(f"density has a negative entry, min={v.min():.3e}")
        mean = v.mean()
        if mean <= 0.0:
            raise ConfigurationError("density has zero total mass")
        if normalize:
            v = v / mean
        return cls(grid=grid, rho=v)

    @property
    def mass(self) -> float:
        return float(self.rho.mean())

    def floored(self, floor: float = 1e-300) -> "GridMeasure":
        """Strictly positive copy; logs a warning when the floor actually fires."""
        if self.rho.min() >= floor:
            return self
        n_floored = int((self.rho < floor).sum())
        log.warning("flooring %d density entries at %.0e before log-domain work", n_floored, floor)
        v = np.maximum(self.rho, floor)
        return GridMeasure.from_values(self.grid, v)


def uniform(grid: Grid) -> GridMeasure:
    return GridMeasure(grid=grid, rho=np.ones(grid.N))


def _wrapped_gaussian_values(grid: Grid, center, width: float) -> Array:
    if width <= 0:
        raise ConfigurationError(f"bump width must be positive, got {width}")
    centers = np.atleast_1d(np.asarray(center, dtype=float))
    if centers.size != grid.d:
        raise ConfigurationError(f"center must have {grid.d} coordinates")
    coords = grid.coords()
    vals = np.ones(grid.N)
    for a in range(grid.d):
        diff = (coords[a] - centers[a]) % 1.0
        vals = vals * np.exp(_image_sum_log(diff, width**2))
    return vals


def wrapped_gaussian(grid: Grid, center, width: float) -> GridMeasure:
    """Periodized Gaussian bump of standard deviation `width`, normalized to mean 1."""
    return GridMeasure.from_values(grid, _wrapped_gaussian_values(grid, center, width))


def two_bumps(grid: Grid, c1, c2, width: float) -> GridMeasure:
    """Equal-mass mixture of two wrapped Gaussian bumps."""
    v = _wrapped_gaussian_values(grid, c1, width) + _wrapped_gaussian_values(grid, c2, width)
    return GridMeasure.from_values(grid, v)
