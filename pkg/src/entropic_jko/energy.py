"""Driving functional F = potential + interaction + internal energy.

F(rho) = (1/N) sum_i [ V_i rho_i + (1/2)(W*rho)_i rho_i + f(rho_i) ], with the
internal energy f drawn from a closed enumeration so that convexity, C^3
smoothness and the endpoint blow-up of f' hold by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, GridMismatchError
from .measures import GridMeasure
from .torus_grid import Grid, convolve

Array = np.ndarray

_KINDS = ("zero", "entropy", "power")


@dataclass(frozen=True)
class InternalEnergy:
    """One of: Zero (f = 0), Boltzmann entropy (f = s log s), power law (f = s^m/(m-1)).

    All three have domain bounds d_minus = 0 < 1 < d_plus = +inf. The methods
    extend f and g by continuity at s = 0; f_prime enforces the open domain.
    """

    kind: str
    m: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown internal energy kind {self.kind!r}")
        if self.kind == "power":
            if self.m is None or self.m <= 0 or self.m == 1.0:
                raise ConfigurationError(f"power law exponent must be > 0 and != 1, got {self.m}")
        elif self.m is not None:
            raise ConfigurationError(f"exponent only applies to the power-law kind")

    @classmethod
    def zero(cls) -> "InternalEnergy":
        return cls("zero")

    @classmethod
    def boltzmann_entropy(cls) -> "InternalEnergy":
        return cls("entropy")

    @classmethod
    def power_law(cls, m: float) -> "InternalEnergy":
        return cls("power", m=float(m))

    @property
    def d_minus(self) -> float:
        return 0.0

    @property
    def d_plus(self) -> float:
        return math.inf

    def f(self, s) -> Array:
        """f(s), extended by its limit at s = 0; +inf outside [0, inf)."""
        s = np.asarray(s, dtype=float)
        out = np.where(s < 0.0, np.inf, 0.0)
        pos = s > 0.0
        if self.kind == "entropy":
            vals = np.zeros_like(s)
            vals[pos] = s[pos] * np.log(s[pos])
            out = out + vals
        elif self.kind == "power":
            out = out + np.where(s >= 0.0, s**self.m, 0.0) / (self.m - 1.0)
        return out

    def f_prime(self, s) -> Array:
        s = self._check_interior(s)
        if self.kind == "zero":
            return np.zeros_like(s)
        if self.kind == "entropy":
            return np.log(s) + 1.0
        return self.m * s ** (self.m - 1.0) / (self.m - 1.0)

    def f_double_prime(self, s) -> Array:
        s = self._check_interior(s)
        if self.kind == "zero":
            return np.zeros_like(s)
        if self.kind == "entropy":
            return 1.0 / s
        return self.m * s ** (self.m - 2.0)

    def g(self, s) -> Array:
        """g(s) = s f'(s) - f(s), extended by continuity at s = 0."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0.0):
            raise DomainError("g is undefined for negative densities")
        if self.kind == "zero":
            return np.zeros_like(s)
        if self.kind == "entropy":
            return s.copy()
        return s**self.m

    def g_prime(self, s) -> Array:
        """g'(s) = s f''(s); used for diffusive CFL bounds."""
        s = np.asarray(s, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(s)
        if self.kind == "entropy":
            return np.ones_like(s)
        return self.m * np.maximum(s, 0.0) ** (self.m - 1.0)

    def _check_interior(self, s) -> Array:
        s = np.asarray(s, dtype=float)
        if np.any(s <= self.d_minus) or np.any(s >= self.d_plus):
            bad = int(np.argmax((s <= self.d_minus) | (s >= self.d_plus)))
            raise DomainError(
                f"density value {s.reshape(-1)[bad]:.3e} outside the open domain "
                f"({self.d_minus}, {self.d_plus}) at node {bad}"
            )
        return s


@dataclass(frozen=True)
class EnergySpec:
    """Potential V, even interaction kernel W (both grid samples) and internal energy."""

    grid: Grid
    V: Array
    W: Array
    internal: InternalEnergy

    def __post_init__(self):
        V = np.asarray(self.V, dtype=float).reshape(-1)
        W = np.asarray(self.W, dtype=float).reshape(-1)
        if V.size != self.grid.N or W.size != self.grid.N:
            raise GridMismatchError("V and W must be sampled on the grid")
        if not (np.all(np.isfinite(V)) and np.all(np.isfinite(W))):
            raise ConfigurationError("V and W must be finite")
        # W(-x) = W(x): index i -> (-i) mod n per axis
        W_flip = _reflect(self.grid, W)
        scale = max(1.0, float(np.abs(W).max()))
        if np.abs(W - W_flip).max() > 1e-12 * scale:
            raise ConfigurationError("interaction kernel W must satisfy W(-x) = W(x)")
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "W", W)

    @classmethod
    def free(cls, grid: Grid, internal: InternalEnergy | None = None) -> "EnergySpec":
        """V = W = 0 with the given internal energy (default Zero)."""
        z = np.zeros(grid.N)
        return cls(grid=grid, V=z, W=z.copy(), internal=internal or InternalEnergy.zero())

    @property
    def has_interaction(self) -> bool:
        return bool(np.any(self.W))


def _reflect(grid: Grid, values: Array) -> Array:
    v = grid.reshape(values)
    for axis in range(grid.d):
        idx = (-np.arange(grid.n)) % grid.n
        v = np.take(v, idx, axis=axis)
    return grid.flatten(v)


def eval_F(spec: EnergySpec, rho: GridMeasure) -> float:
    """Energy value; +inf when some rho_i leaves the closed domain of f."""
    r = rho.rho
    f_vals = spec.internal.f(r)
    if not np.all(np.isfinite(f_vals)):
        return math.inf
    total = spec.V * r + f_vals
    if spec.has_interaction:
        total = total + 0.5 * convolve(spec.grid, spec.W, r) * r
    return float(total.mean())


def f_prime(internal: InternalEnergy, s):
    """First derivative of f on the open domain; domain error outside."""
    out = internal.f_prime(s)
    return float(out) if np.isscalar(s) else out


def g_of(internal: InternalEnergy, s):
    """g(s) = s f'(s) - f(s); the nonlinear diffusion flux."""
    s_arr = np.asarray(s, dtype=float)
    internal._check_interior(s_arr)
    out = internal.g(s_arr)
    return float(out) if np.isscalar(s) else out


def first_variation(spec: EnergySpec, rho: GridMeasure) -> Array:
    """V + W*rho + f'(rho), the driving field of the gradient flow."""
    r = rho.rho
    if spec.internal.kind == "zero":
        out = spec.V.copy()
    else:
        out = spec.V + spec.internal.f_prime(r)
    if spec.has_interaction:
        out = out + convolve(spec.grid, spec.W, r)
    return out


def entropy(rho: GridMeasure) -> float:
    """Discrete Boltzmann entropy (1/N) sum rho_i log rho_i, with 0 log 0 = 0."""
    r = rho.rho
    pos = r > 0.0
    vals = np.zeros_like(r)
    vals[pos] = r[pos] * np.log(r[pos])
    return float(vals.mean())
