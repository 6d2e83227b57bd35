"""Periodic uniform grids on the flat torus (d = 1 or 2) and their spectral operators.

Nodes sit at i/n per axis; the Lebesgue measure is normalized to total mass 1,
so every cell carries the quadrature weight 1/N exactly. The heat semigroup,
gradients and circular convolutions are all realized through FFT multipliers,
which makes mass conservation and the semigroup identity exact in floating
point up to round-off.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, GridMismatchError

Array = np.ndarray

# Flooring threshold shared with the Sinkhorn modules: values below this are
# treated as zero before logarithms.
TINY = 1e-300


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with n nodes per axis on [0, 1)^d."""

    d: int
    n: int

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def N(self) -> int:
        return self.n**self.d

    @property
    def axis_nodes(self) -> Array:
        return np.arange(self.n) / self.n

    def coords(self) -> Array:
        """Node coordinates, shape (d, N), row-major over axes."""
        if self.d == 1:
            return self.axis_nodes[None, :]
        x0, x1 = np.meshgrid(self.axis_nodes, self.axis_nodes, indexing="ij")
        return np.stack([x0.ravel(), x1.ravel()])

    def reshape(self, values: Array) -> Array:
        return np.asarray(values, dtype=float).reshape((self.n,) * self.d)

    def flatten(self, values: Array) -> Array:
        return np.asarray(values, dtype=float).reshape(self.N)


def make_grid(d: int, n: int) -> Grid:
    """Build a grid; rejects unsupported dimensions and odd or tiny n."""
    if d not in (1, 2):
        raise ConfigurationError(f"grid dimension must be 1 or 2, got {d}")
    if n < 4 or n % 2 != 0:
        raise ConfigurationError(f"points per axis must be even and >= 4, got {n}")
    return Grid(d=d, n=n)


def _as_values(f) -> Array:
    """Accept bare arrays or objects exposing .rho / .values."""
    v = getattr(f, "rho", None)
    if v is None:
        v = getattr(f, "values", f)
    return np.asarray(v, dtype=float)


def _check_finite(name: str, v: Array) -> None:
    if not np.all(np.isfinite(v)):
        raise ConfigurationError(f"{name} contains NaN or Inf")


@dataclass(frozen=True)
class HeatKernelOp:
    """Spectral realization of f -> f * sigma_t (heat kernel, d sigma/dt = Laplacian/2).

    Multiplier at frequency k is exp(-2 pi^2 |k|^2 t); the k = 0 multiplier is
    exactly 1, so the discrete mean is conserved for every t.
    """

    grid: Grid
    t: float
    multipliers: Array  # rfft layout

    def apply(self, f: Array) -> Array:
        g = self.grid
        v = g.reshape(f)
        if g.d == 1:
            out = np.fft.irfft(np.fft.rfft(v) * self.multipliers, n=g.n)
        else:
            out = np.fft.irfft2(np.fft.rfft2(v) * self.multipliers, s=(g.n, g.n))
        return g.flatten(out)


_KERNEL_CACHE: dict[tuple, HeatKernelOp] = {}
_CACHE_LOCK = threading.Lock()


def heat_kernel_op(grid: Grid, t: float) -> HeatKernelOp:
    if t < 0:
        raise ConfigurationError(f"heat time must be >= 0, got {t}")
    key = (grid.d, grid.n, float(t))
    with _CACHE_LOCK:
        op = _KERNEL_CACHE.get(key)
        if op is None:
            k = np.fft.rfftfreq(grid.n, d=grid.h)  # integer frequencies 0..n/2
            if grid.d == 1:
                k2 = k**2
            else:
                kf = np.fft.fftfreq(grid.n, d=grid.h)
                k2 = kf[:, None] ** 2 + k[None, :] ** 2
            mult = np.exp(-2.0 * math.pi**2 * k2 * t)
            op = HeatKernelOp(grid=grid, t=float(t), multipliers=mult)
            if len(_KERNEL_CACHE) > 512:
                _KERNEL_CACHE.clear()
            _KERNEL_CACHE[key] = op
    return op


_LOG_KERNEL_CACHE: dict[tuple, Array] = {}


def log_heat_matrix(grid: Grid, t: float) -> Array:
    """Dense log of the wrapped heat kernel, log sigma_t(x_i - x_j), shape (N, N).

    Exact image-sum evaluation (no spectral truncation); used as a numerically
    uniform fallback for log-domain kernel applications when the scalings span
    a dynamic range the FFT route cannot carry in double precision. Only
    built for small grids.
    """
    if t <= 0:
        raise ConfigurationError(f"dense log-kernel needs t > 0, got {t}")
    key = (grid.d, grid.n, float(t))
    with _CACHE_LOCK:
        mat = _LOG_KERNEL_CACHE.get(key)
        if mat is None:
            diffs = np.arange(grid.n) / grid.n
            axis = _image_sum_log(diffs, t) - 0.5 * math.log(2.0 * math.pi * t)
            idx = (np.arange(grid.n)[:, None] - np.arange(grid.n)[None, :]) % grid.n
            circ = axis[idx]
            if grid.d == 1:
                mat = circ
            else:
                eye = np.arange(grid.n)
                i0 = np.repeat(eye, grid.n)
                i1 = np.tile(eye, grid.n)
                mat = circ[np.ix_(i0, i0)] + circ[np.ix_(i1, i1)]
            if len(_LOG_KERNEL_CACHE) > 8:
                _LOG_KERNEL_CACHE.clear()
            _LOG_KERNEL_CACHE[key] = mat
    return mat


def apply_heat(grid: Grid, t: float, f) -> Array:
    """Convolve f with the torus heat kernel at time t.

    Conserves the discrete mean exactly; for nonnegative input the tiny
    negative ringing of the truncated spectrum is clipped to 0 (no
    renormalization here, that is the caller's job).
    """
    v = _as_values(f)
    _check_finite("apply_heat input", v)
    out = heat_kernel_op(grid, t).apply(v)
    if v.min() >= 0.0:
        out = np.maximum(out, 0.0)
    return out


def spectral_gradient(grid: Grid, f) -> Array:
    """Per-axis derivative via the 2*pi*i*k multiplier; shape (d, N).

    Exact on band-limited functions; the Nyquist mode is set to zero as is
    standard for odd-order spectral derivatives of real data.
    """
    v = _as_values(f)
    _check_finite("spectral_gradient input", v)
    vr = grid.reshape(v)
    out = np.empty((grid.d, grid.N))
    if grid.d == 1:
        k = np.fft.rfftfreq(grid.n, d=grid.h)
        mult = 2j * math.pi * k
        mult[-1] = 0.0  # Nyquist
        out[0] = np.fft.irfft(np.fft.rfft(vr) * mult, n=grid.n)
        return out
    kf = np.fft.fftfreq(grid.n, d=grid.h)
    kr = np.fft.rfftfreq(grid.n, d=grid.h)
    spec = np.fft.rfft2(vr)
    m0 = 2j * math.pi * kf
    m0[grid.n // 2] = 0.0
    m1 = 2j * math.pi * kr
    m1[-1] = 0.0
    out[0] = grid.flatten(np.fft.irfft2(spec * m0[:, None], s=(grid.n, grid.n)))
    out[1] = grid.flatten(np.fft.irfft2(spec * m1[None, :], s=(grid.n, grid.n)))
    return out


def _image_sum_log(diff: Array, eps: float) -> Array:
    """log sum_k exp(-(diff+k)^2 / (2 eps)) per axis, stabilized, truncated images."""
    K = max(6, math.ceil(6.0 * math.sqrt(eps)))
    ks = np.arange(-K, K + 1, dtype=float)
    z = -((diff[..., None] + ks) ** 2) / (2.0 * eps)
    m = z.max(axis=-1)
    return m + np.log(np.exp(z - m[..., None]).sum(axis=-1))


def torus_cost(eps: float, x, y) -> float:
    """Wrapped-Gaussian transport cost: -eps * log sum_k exp(-|y+k-x|^2 / (2 eps)).

    Tends to d(x,y)^2/2 as eps -> 0, where d is the torus distance. Symmetric
    in (x, y) and invariant under common translations mod 1.
    """
    if eps <= 0:
        raise ConfigurationError(f"eps must be positive, got {eps}")
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    yv = np.atleast_1d(np.asarray(y, dtype=float))
    if xv.shape != yv.shape:
        raise ConfigurationError("x and y must have the same dimension")
    diff = (yv - xv) % 1.0
    return float(-eps * _image_sum_log(diff, eps).sum())


def convolve(grid: Grid, W, rho) -> Array:
    """Quadrature-weighted circular convolution (W * rho)(x_i) = (1/N) sum_j W(x_i-x_j) rho_j."""
    w = _as_values(W)
    r = _as_values(rho)
    if w.size != grid.N or r.size != grid.N:
        raise GridMismatchError(
            f"convolve operands of size {w.size}, {r.size} on a grid with N={grid.N}"
        )
    _check_finite("convolve kernel", w)
    _check_finite("convolve density", r)
    if grid.d == 1:
        out = np.fft.irfft(np.fft.rfft(w) * np.fft.rfft(r), n=grid.n)
    else:
        wr, rr = grid.reshape(w), grid.reshape(r)
        out = np.fft.irfft2(np.fft.rfft2(wr) * np.fft.rfft2(rr), s=(grid.n, grid.n))
    return grid.flatten(out) / grid.N
