"""Static Schrödinger problem on the torus solved by log-domain Sinkhorn/IPFP.

The Gibbs kernel is never materialized: it is applied as the heat semigroup at
time eps (an O(N log N) spectral convolution), so the implicit transport plan
gamma(x_i, y_j) = a_i sigma_eps(y_j - x_i) b_j / N^2 exists only through kernel
applications. Scalings a, b are kept as logarithms with running
max-stabilization, which keeps the iteration alive down to eps ~ 1e-3 at n = 512.

Cost convention: D_eps(mu, nu)^2 = 2 eps min { H(gamma | R_eps) : gamma in
Pi(mu, nu) }, which at the optimum equals
2 eps [ <log a, mu> + <log b, nu> ] with the (1/N) quadrature.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ConvergenceError, GridMismatchError
from .measures import GridMeasure
from .torus_grid import TINY, Grid, apply_heat, log_heat_matrix, spectral_gradient

log = logging.getLogger(__name__)

Array = np.ndarray

# Log-range of the scaling vector beyond which the FFT kernel application
# loses the small entries to round-off (relative noise ~ 1e-16 * exp(range),
# so range 12 already floors residuals near 1e-11); switch to an exact dense
# log-sum-exp application on small grids instead.
DENSE_RANGE_SWITCH = 12.0
DENSE_MAX_POINTS = 2048


@dataclass(eq=False)
class DualPotentials:
    """Log-domain Sinkhorn scalings with a fixed additive gauge.

    phi = eps_eff * log_b and psi = eps_eff * log_a, where eps_eff is the
    KL weight (eps for the plain problem, eps/tau inside a proximal step).
    The gauge is mean(phi) = 0. `eps` is the heat-kernel time.
    """

    grid: Grid
    eps: float
    eps_eff: float
    log_a: Array
    log_b: Array
    converged: bool

    @property
    def phi(self) -> Array:
        return self.eps_eff * self.log_b

    @property
    def psi(self) -> Array:
        return self.eps_eff * self.log_a


@dataclass
class SinkhornReport:
    iterations: int
    final_residual: float
    cost: float  # D_eps^2 / 2
    converged: bool


class LogHeatApplier:
    """log( exp(log_f) * sigma_t ) with max-stabilization and a positivity floor.

    When log_f spans more than DENSE_RANGE_SWITCH (and the grid is small), the
    spectral route would drown the small entries in round-off noise of size
    ~1e-16 * exp(range); an exact dense log-sum-exp over the wrapped-Gaussian
    log-kernel is used instead, which is uniformly accurate per output node.
    The dense route is sticky within one applier (one Sinkhorn solve): mixing
    the two kernel realizations across iterations of a single solve would make
    the iteration chase two slightly different fixed points.
    """

    def __init__(self, grid: Grid, t: float):
        self.grid = grid
        self.t = t
        self.use_dense = False
        self._warned = False

    def __call__(self, log_f: Array) -> Array:
        grid, t = self.grid, self.t
        m = float(log_f.max())
        rng = m - float(log_f.min())
        if t > 0.0 and (self.use_dense or rng > DENSE_RANGE_SWITCH):
            if grid.N <= DENSE_MAX_POINTS:
                self.use_dense = True
                mat = log_heat_matrix(grid, t) + log_f[None, :]
                row_max = mat.max(axis=1, keepdims=True)
                out = row_max[:, 0] + np.log(np.exp(mat - row_max).sum(axis=1))
                return out - math.log(grid.N)
            if not self._warned:
                self._warned = True
                log.warning(
                    "log-domain kernel application with range %.1f on N=%d: FFT "
                    "round-off may floor residuals near %.1e",
                    rng, grid.N, 1e-16 * math.exp(min(rng, 60.0)),
                )
        out = apply_heat(grid, t, np.exp(log_f - m))
        return np.log(np.maximum(out, TINY)) + m


def log_apply_heat(grid: Grid, t: float, log_f: Array) -> Array:
    """One-shot log-domain kernel application (non-sticky)."""
    return LogHeatApplier(grid, t)(log_f)


def _require_positive(name: str, mu: GridMeasure) -> None:
    if mu.rho.min() <= 0.0:
        raise ConfigurationError(
            f"{name} must be strictly positive (finite-entropy requirement); "
            f"min entry is {mu.rho.min():.3e}"
        )


def sinkhorn(
    mu: GridMeasure,
    nu: GridMeasure,
    eps: float,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> tuple[DualPotentials, SinkhornReport]:
    """Alternating dual updates for the static problem between mu and nu.

    Updates (log domain, lambda = eps):
        psi <- lambda log mu - lambda log(K exp(phi/lambda))
        phi <- lambda log nu - lambda log(K exp(psi/lambda))
    Convergence is declared on the L1 marginal residual
        (1/N) sum |a K b - mu|  <=  tol
    (the nu-marginal is exact right after the phi-update).
    """
    if eps <= 0:
        raise ConfigurationError(f"eps must be positive, got {eps}")
    if mu.grid != nu.grid:
        raise GridMismatchError("mu and nu live on different grids")
    _require_positive("mu", mu)
    _require_positive("nu", nu)
    grid = mu.grid
    log_mu = np.log(mu.rho)
    log_nu = np.log(nu.rho)

    kernel = LogHeatApplier(grid, eps)
    log_b = np.zeros(grid.N)
    log_a = np.zeros(grid.N)
    residual = np.inf
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        log_a = log_mu - kernel(log_b)
        log_b = log_nu - kernel(log_a)
        marginal = np.exp(log_a + kernel(log_b))
        residual = float(np.abs(marginal - mu.rho).mean())
        if residual <= tol:
            converged = True
            break

    gauge = float(log_b.mean())
    log_b -= gauge
    log_a += gauge
    pot = DualPotentials(
        grid=grid, eps=eps, eps_eff=eps, log_a=log_a, log_b=log_b, converged=converged
    )
    if not converged:
        log.warning("sinkhorn stopped at max_iter=%d with residual %.3e", max_iter, residual)
        report = SinkhornReport(iterations, residual, float("nan"), False)
        return pot, report
    half_cost = 0.5 * cost_from_potentials(pot, mu, nu, eps)
    report = SinkhornReport(iterations, residual, half_cost, True)
    return pot, report


def cost_from_potentials(
    pot: DualPotentials, mu: GridMeasure, nu: GridMeasure, eps: float
) -> float:
    """D_eps^2 = 2 eps [ <log a, mu> + <log b, nu> ]; gauge invariant."""
    if not pot.converged:
        raise ConvergenceError("cost requested from unconverged potentials")
    if eps != pot.eps:
        raise ConfigurationError(f"potentials were computed for eps={pot.eps}, got {eps}")
    return float(2.0 * eps * ((pot.log_a * mu.rho).mean() + (pot.log_b * nu.rho).mean()))


def entropic_interpolation(pot: DualPotentials, eps: float, s: float) -> GridMeasure:
    """Bridge density rho_s = (K_{eps s} a) (K_{eps(1-s)} b), renormalized to mean 1."""
    if not pot.converged:
        raise ConvergenceError("interpolation requested from unconverged potentials")
    if not 0.0 <= s <= 1.0:
        raise ConfigurationError(f"interpolation fraction must lie in [0, 1], got {s}")
    grid = pot.grid
    log_rho = log_apply_heat(grid, eps * s, pot.log_a) + log_apply_heat(
        grid, eps * (1.0 - s), pot.log_b
    )
    rho = np.exp(log_rho)
    mass = float(rho.mean())
    correction = abs(mass - 1.0)
    if correction > 1e-8:
        log.warning("entropic interpolation mass off by %.3e before renormalization", correction)
    return GridMeasure.from_values(grid, rho)


def forward_velocity(pot: DualPotentials, eps: float, s: float) -> Array:
    """Spectral gradient of phi(s) = eps log(K_{eps(1-s)} b); shape (d, N)."""
    if not pot.converged:
        raise ConvergenceError("velocity requested from unconverged potentials")
    if not 0.0 <= s <= 1.0:
        raise ConfigurationError(f"fraction must lie in [0, 1], got {s}")
    phi_s = eps * log_apply_heat(pot.grid, eps * (1.0 - s), pot.log_b)
    return spectral_gradient(pot.grid, phi_s)
