"""Finite-volume reference solver for the limiting PDE on the torus:

    d rho/dt - div( rho (grad V + grad W * rho) ) = Lap g(rho) + (alpha/2) Lap rho.

Explicit march: first-order upwind advective fluxes from the face-averaged
velocity u = -grad(V + W * rho) (node velocities are spectral), central
differences on the diffusive flux of G(rho) = g(rho) + (alpha/2) rho, and a
CFL-limited time step recomputed every step. The update telescopes over faces,
so mass is conserved exactly up to round-off; a renormalization guard keeps the
snapshots at mean 1. This module is a validated oracle, not a certified solver.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .energy import EnergySpec
from .errors import ConfigurationError, ConvergenceError
from .jko import Trajectory
from .measures import GridMeasure
from .torus_grid import Grid, convolve, spectral_gradient

log = logging.getLogger(__name__)

Array = np.ndarray


@dataclass(frozen=True)
class PdeConfig:
    alpha: float
    t_end: float
    cfl_safety: float = 0.4
    max_dt: float | None = None
    snapshot_times: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigurationError(f"alpha must be >= 0, got {self.alpha}")
        if self.t_end <= 0:
            raise ConfigurationError(f"t_end must be positive, got {self.t_end}")
        if not 0 < self.cfl_safety <= 1:
            raise ConfigurationError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")

    def resolved_snapshots(self) -> Array:
        if self.snapshot_times is None:
            return np.array([0.0, self.t_end])
        ts = np.asarray(self.snapshot_times, dtype=float)
        if ts.ndim != 1 or ts.size == 0 or ts.min() < 0 or ts.max() > self.t_end + 1e-12:
            raise ConfigurationError("snapshot times must lie in [0, t_end]")
        return np.unique(np.concatenate([[0.0], ts]))


def _velocity(grid: Grid, spec: EnergySpec, rho: Array) -> Array | None:
    """Node drift u = -grad(V + W * rho); None when there is no drift at all."""
    if not np.any(spec.V) and not spec.has_interaction:
        return None
    pot = spec.V
    if spec.has_interaction:
        pot = pot + convolve(grid, spec.W, rho)
    return -spectral_gradient(grid, pot)


def _stable_dt(grid: Grid, spec: EnergySpec, alpha: float, rho: Array, u: Array | None) -> float:
    h = grid.h
    dt = math.inf
    if u is not None:
        umax = float(np.abs(u).max())
        if umax > 0:
            dt = h / umax
    diff = float(spec.internal.g_prime(np.maximum(rho, 0.0)).max()) + 0.5 * alpha
    if diff > 0:
        dt = min(dt, h * h / (2.0 * grid.d * diff))
    return dt


def _flux_update(grid: Grid, spec: EnergySpec, alpha: float, rho: Array, u: Array | None, dt: float) -> Array:
    """One conservative explicit step on the flat density vector."""
    h = grid.h
    shape = (grid.n,) * grid.d
    r = rho.reshape(shape)
    G = (spec.internal.g(np.maximum(rho, 0.0)) + 0.5 * alpha * rho).reshape(shape)
    out = r.copy()
    for axis in range(grid.d):
        total = -(np.roll(G, -1, axis=axis) - G) / h  # diffusive flux at face i+1/2
        if u is not None:
            ua = u[axis].reshape(shape)
            uf = 0.5 * (ua + np.roll(ua, -1, axis=axis))
            upwind = np.where(uf > 0.0, r, np.roll(r, -1, axis=axis))
            total = total + uf * upwind
        out = out - (dt / h) * (total - np.roll(total, 1, axis=axis))
    return out.reshape(grid.N)


def pde_step(state: GridMeasure, spec: EnergySpec, alpha: float, dt: float) -> GridMeasure:
    """Single conservative update; rejects dt above the CFL bound for this state."""
    if alpha < 0 or dt <= 0:
        raise ConfigurationError("alpha must be >= 0 and dt > 0")
    grid = state.grid
    u = _velocity(grid, spec, state.rho)
    bound = _stable_dt(grid, spec, alpha, state.rho, u)
    if dt > bound * (1.0 + 1e-12):
        raise ConfigurationError(f"dt={dt:.3e} violates the CFL bound {bound:.3e}")
    new = _flux_update(grid, spec, alpha, state.rho, u, dt)
    if new.min() < -1e-14:
        raise ConvergenceError(f"positivity lost: min value {new.min():.3e} below -1e-14")
    new = np.maximum(new, 0.0)
    correction = abs(float(new.mean()) - 1.0)
    if correction > 1e-12:
        log.warning("pde step renormalization correction %.3e exceeds 1e-12", correction)
    return GridMeasure.from_values(grid, new)


def solve_pde(rho0: GridMeasure, spec: EnergySpec, cfg: PdeConfig) -> Trajectory:
    """March to every requested snapshot instant exactly; abort on blow-up."""
    if rho0.grid != spec.grid:
        raise ConfigurationError("initial state and energy live on different grids")
    grid = rho0.grid
    snapshots = cfg.resolved_snapshots()
    states: list[GridMeasure] = []
    times: list[float] = []
    rho = rho0.rho.copy()
    t = 0.0
    for target in snapshots:
        while t < target - 1e-14:
            u = _velocity(grid, spec, rho)
            dt = cfg.cfl_safety * _stable_dt(grid, spec, cfg.alpha, rho, u)
            if cfg.max_dt is not None:
                dt = min(dt, cfg.max_dt)
            if dt < 1e-12:
                raise ConvergenceError(f"time step underflow: dt={dt:.3e} at t={t:.6f}")
            dt = min(dt, target - t)
            new = _flux_update(grid, spec, cfg.alpha, rho, u, dt)
            if not np.all(np.isfinite(new)) or new.min() < -1e-10:
                err = ConvergenceError(
                    f"PDE march blew up at t={t:.6f} (min={new.min():.3e})"
                )
                err.partial_trajectory = Trajectory(
                    times=np.asarray(times), states=states, diagnostics=[]
                )
                raise err
            mass = new.mean()
            if abs(mass - 1.0) > 1e-12:
                log.warning("pde march mass correction %.3e exceeds 1e-12 at t=%.6f", abs(mass - 1.0), t)
            rho = np.maximum(new, 0.0)
            rho /= rho.mean()
            t += dt
        states.append(GridMeasure.from_values(grid, rho))
        times.append(float(target))
    return Trajectory(times=np.asarray(times), states=states, diagnostics=[])
