"""Flat key-value experiment configuration.

Files look like

    # heat flow on the torus
    grid.d = 1
    grid.n = 256
    init.kind = wrapped-gaussian
    init.center = 0.5
    init.width = 0.1
    scheme.tau = 0.01
    scheme.alpha = 1.0
    scheme.t_end = 0.05

Every key has a pinned default (or is required per command); the resolved
configuration — defaults included — is echoed verbatim into the run manifest
so an archived directory fully describes its experiment. `eps` and `alpha`
are mutually exclusive; given `alpha`, eps = alpha * tau is derived (alpha = 0
maps to the vanishing-ratio regime eps = tau^(3/2)).
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .energy import EnergySpec, InternalEnergy
from .errors import ConfigurationError
from .jko import JkoConfig
from .measures import GridMeasure, two_bumps, uniform, wrapped_gaussian
from .torus_grid import Grid, make_grid

COMMANDS = ("flow", "pde", "compare", "sinkhorn", "sweep")

# key -> (default value or REQUIRED, parser)
_REQUIRED = object()


def _parse_bool(s: str) -> bool:
    if s.lower() in ("true", "1", "yes"):
        return True
    if s.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {s}")


def _parse_float_list(s: str) -> tuple[float, ...]:
    items = [p.strip() for p in s.split(",") if p.strip()]
    return tuple(float(p) for p in items)


_SCHEMA: dict[str, tuple] = {
    "grid.d": (1, int),
    "grid.n": (_REQUIRED, int),
    "init.kind": ("uniform", str),
    "init.center": (0.5, float),
    "init.center2": (0.75, float),
    "init.width": (0.1, float),
    "init.csv": ("", str),
    "target.kind": ("uniform", str),
    "target.center": (0.5, float),
    "target.center2": (0.75, float),
    "target.width": (0.1, float),
    "target.csv": ("", str),
    "energy.v.kind": ("zero", str),
    "energy.v.amplitude": (1.0, float),
    "energy.v.frequency": (1, int),
    "energy.v.csv": ("", str),
    "energy.w.kind": ("zero", str),
    "energy.w.amplitude": (1.0, float),
    "energy.w.frequency": (1, int),
    "energy.w.csv": ("", str),
    "energy.internal": ("zero", str),
    "energy.internal_m": (2.0, float),
    "scheme.tau": (0.01, float),
    "scheme.eps": (math.nan, float),
    "scheme.alpha": (math.nan, float),
    "scheme.n_steps": (0, int),
    "scheme.t_end": (math.nan, float),
    "solver.inner_tol": (1e-10, float),
    "solver.inner_max_iter": (50_000, int),
    "solver.interaction_tol": (1e-9, float),
    "solver.interaction_max_iter": (80, int),
    "solver.newton_tol": (1e-12, float),
    "sinkhorn.eps": (0.05, float),
    "sinkhorn.tol": (1e-10, float),
    "sinkhorn.max_iter": (100_000, int),
    "pde.alpha": (math.nan, float),
    "pde.t_end": (math.nan, float),
    "pde.cfl_safety": (0.4, float),
    "pde.max_dt": (math.nan, float),
    "pde.snapshots": (2, int),
    "sweep.alphas": ((0.0, 1.0), _parse_float_list),
    "sweep.taus": ((0.02, 0.01, 0.005), _parse_float_list),
    "sweep.t_end": (0.1, float),
    "sweep.refine": (2, int),
    "output.dir": ("out", str),
    "seed": (0, int),
}


def parse_config_text(text: str, overrides: list[str] | None = None) -> dict:
    """Parse `key = value` lines plus --set overrides into a resolved dict."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        raw[key.strip()] = value.split("#", 1)[0].strip()
    for item in overrides or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        raw[key.strip()] = value.strip()

    resolved: dict = {}
    for key, value in raw.items():
        if key not in _SCHEMA:
            raise ConfigurationError(f"unknown configuration key {key!r}")
        _, parser = _SCHEMA[key]
        try:
            resolved[key] = parser(value)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"invalid value for {key!r}: {value!r} ({exc})") from exc
    for key, (default, _) in _SCHEMA.items():
        if key not in resolved:
            if default is _REQUIRED:
                raise ConfigurationError(f"missing required configuration key {key!r}")
            resolved[key] = default
    return resolved


def load_config(path: str | Path, overrides: list[str] | None = None) -> dict:
    return parse_config_text(Path(path).read_text(encoding="utf-8"), overrides)


def _positive(cfg: dict, key: str) -> float:
    v = cfg[key]
    if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
        raise ConfigurationError(f"{key!r} must be a positive finite number, got {v}")
    return float(v)


def build_grid(cfg: dict) -> Grid:
    try:
        return make_grid(cfg["grid.d"], cfg["grid.n"])
    except ConfigurationError as exc:
        raise ConfigurationError(f"grid.d/grid.n: {exc}") from exc


def _build_measure(cfg: dict, grid: Grid, prefix: str) -> GridMeasure:
    kind = cfg[f"{prefix}.kind"]
    if kind == "uniform":
        return uniform(grid)
    if kind == "wrapped-gaussian":
        width = _positive(cfg, f"{prefix}.width")
        center = cfg[f"{prefix}.center"]
        return wrapped_gaussian(grid, (center,) * grid.d, width)
    if kind == "two-bumps":
        width = _positive(cfg, f"{prefix}.width")
        return two_bumps(
            grid, (cfg[f"{prefix}.center"],) * grid.d, (cfg[f"{prefix}.center2"],) * grid.d, width
        )
    if kind == "csv":
        path = cfg[f"{prefix}.csv"]
        if not path:
            raise ConfigurationError(f"{prefix}.csv is required when {prefix}.kind = csv")
        values = _read_density_csv(path, grid.N, key=f"{prefix}.csv")
        return GridMeasure.from_values(grid, values)
    raise ConfigurationError(f"{prefix}.kind must be one of uniform, wrapped-gaussian, two-bumps, csv")


def _read_density_csv(path: str, expected: int, key: str) -> np.ndarray:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise ConfigurationError(f"{key}: cannot read {path!r} ({exc})") from exc
    flat = [float(v) for row in rows for v in row]
    if len(flat) != expected:
        raise ConfigurationError(f"{key}: expected {expected} values, found {len(flat)}")
    return np.asarray(flat)


def _build_field(cfg: dict, grid: Grid, prefix: str) -> np.ndarray:
    kind = cfg[f"{prefix}.kind"]
    if kind == "zero":
        return np.zeros(grid.N)
    if kind == "cosine":
        amp = cfg[f"{prefix}.amplitude"]
        freq = cfg[f"{prefix}.frequency"]
        if freq < 1:
            raise ConfigurationError(f"{prefix}.frequency must be >= 1")
        coords = grid.coords()
        vals = np.zeros(grid.N)
        for a in range(grid.d):
            vals += amp * np.cos(2.0 * math.pi * freq * coords[a])
        return vals
    if kind == "csv":
        path = cfg[f"{prefix}.csv"]
        if not path:
            raise ConfigurationError(f"{prefix}.csv is required when {prefix}.kind = csv")
        return _read_density_csv(path, grid.N, key=f"{prefix}.csv")
    raise ConfigurationError(f"{prefix}.kind must be one of zero, cosine, csv")


def build_energy(cfg: dict, grid: Grid) -> EnergySpec:
    kind = cfg["energy.internal"]
    if kind == "zero":
        internal = InternalEnergy.zero()
    elif kind == "entropy":
        internal = InternalEnergy.boltzmann_entropy()
    elif kind == "power":
        try:
            internal = InternalEnergy.power_law(cfg["energy.internal_m"])
        except ConfigurationError as exc:
            raise ConfigurationError(f"energy.internal_m: {exc}") from exc
    else:
        raise ConfigurationError("energy.internal must be one of zero, entropy, power")
    return EnergySpec(
        grid=grid,
        V=_build_field(cfg, grid, "energy.v"),
        W=_build_field(cfg, grid, "energy.w"),
        internal=internal,
    )


def resolve_scheme(cfg: dict) -> tuple[JkoConfig, float]:
    """JkoConfig plus the flow horizon; records the derived eps back into cfg."""
    tau = _positive(cfg, "scheme.tau")
    has_eps = math.isfinite(cfg["scheme.eps"])
    has_alpha = math.isfinite(cfg["scheme.alpha"])
    if has_eps and has_alpha:
        raise ConfigurationError("scheme.eps and scheme.alpha are mutually exclusive")
    if not has_eps and not has_alpha:
        raise ConfigurationError("one of scheme.eps or scheme.alpha is required")
    if has_eps:
        eps = _positive(cfg, "scheme.eps")
    else:
        alpha = cfg["scheme.alpha"]
        if alpha < 0:
            raise ConfigurationError("scheme.alpha must be >= 0")
        eps = alpha * tau if alpha > 0 else tau**1.5
        cfg["scheme.eps"] = eps
    n_steps = cfg["scheme.n_steps"]
    has_t_end = math.isfinite(cfg["scheme.t_end"])
    if n_steps > 0 and has_t_end:
        raise ConfigurationError("scheme.n_steps and scheme.t_end are mutually exclusive")
    if n_steps <= 0:
        if not has_t_end:
            raise ConfigurationError("one of scheme.n_steps or scheme.t_end is required")
        t_end = _positive(cfg, "scheme.t_end")
        n_steps = int(math.ceil(t_end / tau - 1e-9))
        cfg["scheme.n_steps"] = n_steps
    t_end = n_steps * tau
    cfg["scheme.t_end"] = t_end
    try:
        jko_cfg = JkoConfig(
            tau=tau,
            eps=eps,
            n_steps=n_steps,
            inner_tol=_positive(cfg, "solver.inner_tol"),
            inner_max_iter=cfg["solver.inner_max_iter"],
            interaction_tol=_positive(cfg, "solver.interaction_tol"),
            interaction_max_iter=cfg["solver.interaction_max_iter"],
            newton_tol=_positive(cfg, "solver.newton_tol"),
        )
    except ConfigurationError as exc:
        raise ConfigurationError(f"scheme/solver: {exc}") from exc
    return jko_cfg, t_end
