"""Experiment runner: `entropic-jko <command> --config <path> [--set k=v ...] [--out dir]`.

Commands: flow (entropic JKO march), pde (reference solver), compare (both,
matched), sinkhorn (one transport cost), sweep (tau/alpha convergence study).
Each run writes a `manifest` echoing the fully resolved configuration plus
version and timings, and CSVs with 17-significant-digit floats so that two
runs of the same config produce byte-identical data files.

Exit codes: 0 success, 1 configuration error, 2 solver non-convergence
(diagnostics for completed steps are still written), 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import SweepRow, compare_trajectories, run_sweep
from .config import COMMANDS, build_energy, build_grid, load_config, resolve_scheme, _build_measure, _positive
from .errors import ConfigurationError, ConvergenceError
from .jko import Trajectory, run_flow
from .pde_ref import PdeConfig, solve_pde
from .schrodinger import sinkhorn


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        return f"{x:.17g}"
    if isinstance(x, tuple):
        return ",".join(_fmt(v) for v in x)
    return str(x)


def _write_manifest(out: Path, cfg: dict, command: str, timings: dict[str, float]) -> None:
    lines = [f"command = {command}", f"version = {__version__}"]
    for key in sorted(cfg):
        lines.append(f"{key} = {_fmt(cfg[key])}")
    for key in sorted(timings):
        lines.append(f"timing.{key} = {timings[key]:.3f}")
    (out / "manifest").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_trajectory(path: Path, traj: Trajectory) -> None:
    n_vals = traj.states[0].grid.N
    header = ["t"] + [f"x{i}" for i in range(n_vals)]
    rows = ([t] + list(state.rho) for t, state in zip(traj.times, traj.states))
    _write_csv(path, header, rows)


_DIAG_COLUMNS = [
    "step", "t", "d_eps_sq", "f_before", "f_after", "h_before", "h_after",
    "optimality_residual", "inner_iterations", "dissipation_slack", "mass_correction",
]


def _write_diagnostics(path: Path, traj: Trajectory, tau: float) -> None:
    rows = []
    for k, d in enumerate(traj.diagnostics, start=1):
        rows.append([
            k, k * tau, d.d_eps_sq, d.f_before, d.f_after, d.h_before, d.h_after,
            d.optimality_residual, d.inner_iterations, d.dissipation_slack, d.mass_correction,
        ])
    _write_csv(path, _DIAG_COLUMNS, rows)


_SWEEP_COLUMNS = ["alpha", "tau", "eps", "n", "terminal_l1", "mean_inner_iterations"]


def _write_sweep(path: Path, rows: list[SweepRow]) -> None:
    # wall_time_s deliberately stays out of the CSV (it would break the
    # byte-identical determinism contract); totals go into the manifest.
    _write_csv(
        path,
        _SWEEP_COLUMNS,
        ([r.alpha, r.tau, r.eps, r.n, r.terminal_l1, r.mean_inner_iterations] for r in rows),
    )


def _cmd_flow(cfg: dict, out: Path) -> int:
    grid = build_grid(cfg)
    rho0 = _build_measure(cfg, grid, "init")
    spec = build_energy(cfg, grid)
    jko_cfg, _ = resolve_scheme(cfg)
    timings: dict[str, float] = {}
    start = time.perf_counter()
    status = 0
    try:
        traj = run_flow(rho0, spec, jko_cfg)
    except ConvergenceError as err:
        traj = err.partial_trajectory
        (out / "error_report.txt").write_text(str(err) + "\n", encoding="utf-8")
        status = 2
    timings["flow_s"] = time.perf_counter() - start
    if traj is not None:
        _write_trajectory(out / "trajectory.csv", traj)
        _write_diagnostics(out / "diagnostics.csv", traj, jko_cfg.tau)
    _write_manifest(out, cfg, "flow", timings)
    return status


def _resolve_pde_cfg(cfg: dict, default_alpha: float | None = None, snapshot_times=None) -> PdeConfig:
    alpha = cfg["pde.alpha"]
    if not math.isfinite(alpha):
        if default_alpha is None:
            raise ConfigurationError("pde.alpha is required")
        alpha = default_alpha
        cfg["pde.alpha"] = alpha
    t_end = cfg["pde.t_end"]
    if not math.isfinite(t_end):
        if not math.isfinite(cfg["scheme.t_end"]):
            raise ConfigurationError("pde.t_end is required")
        t_end = cfg["scheme.t_end"]
        cfg["pde.t_end"] = t_end
    max_dt = cfg["pde.max_dt"]
    if snapshot_times is None:
        count = max(2, cfg["pde.snapshots"])
        snapshot_times = tuple(np.linspace(0.0, t_end, count))
    try:
        return PdeConfig(
            alpha=alpha,
            t_end=t_end,
            cfl_safety=cfg["pde.cfl_safety"],
            max_dt=None if not math.isfinite(max_dt) else max_dt,
            snapshot_times=tuple(snapshot_times),
        )
    except ConfigurationError as exc:
        raise ConfigurationError(f"pde.*: {exc}") from exc


def _cmd_pde(cfg: dict, out: Path) -> int:
    grid = build_grid(cfg)
    rho0 = _build_measure(cfg, grid, "init")
    spec = build_energy(cfg, grid)
    pde_cfg = _resolve_pde_cfg(cfg)
    timings = {}
    start = time.perf_counter()
    try:
        traj = solve_pde(rho0, spec, pde_cfg)
    except ConvergenceError as err:
        if err.partial_trajectory is not None and err.partial_trajectory.states:
            _write_trajectory(out / "trajectory.csv", err.partial_trajectory)
        (out / "error_report.txt").write_text(str(err) + "\n", encoding="utf-8")
        _write_manifest(out, cfg, "pde", {"pde_s": time.perf_counter() - start})
        return 2
    timings["pde_s"] = time.perf_counter() - start
    _write_trajectory(out / "trajectory.csv", traj)
    _write_manifest(out, cfg, "pde", timings)
    return 0


def _cmd_compare(cfg: dict, out: Path) -> int:
    grid = build_grid(cfg)
    rho0 = _build_measure(cfg, grid, "init")
    spec = build_energy(cfg, grid)
    jko_cfg, t_end = resolve_scheme(cfg)
    timings = {}
    start = time.perf_counter()
    status = 0
    try:
        traj = run_flow(rho0, spec, jko_cfg)
    except ConvergenceError as err:
        traj = err.partial_trajectory
        (out / "error_report.txt").write_text(str(err) + "\n", encoding="utf-8")
        status = 2
    timings["flow_s"] = time.perf_counter() - start
    if traj is not None and len(traj.states) > 0:
        _write_trajectory(out / "trajectory.csv", traj)
        _write_diagnostics(out / "diagnostics.csv", traj, jko_cfg.tau)
    if status == 0:
        default_alpha = jko_cfg.eps / jko_cfg.tau
        pde_cfg = _resolve_pde_cfg(cfg, default_alpha=default_alpha, snapshot_times=traj.times)
        start = time.perf_counter()
        ref = solve_pde(rho0, spec, pde_cfg)
        timings["pde_s"] = time.perf_counter() - start
        _write_trajectory(out / "reference.csv", ref)
        rows = [[t, compare_trajectories(traj, ref, t)] for t in traj.times]
        _write_csv(out / "comparison.csv", ["t", "l1"], rows)
    _write_manifest(out, cfg, "compare", timings)
    return status


def _cmd_sinkhorn(cfg: dict, out: Path) -> int:
    grid = build_grid(cfg)
    mu = _build_measure(cfg, grid, "init")
    nu = _build_measure(cfg, grid, "target")
    eps = _positive(cfg, "sinkhorn.eps")
    tol = _positive(cfg, "sinkhorn.tol")
    timings = {}
    start = time.perf_counter()
    pot, report = sinkhorn(mu, nu, eps, tol=tol, max_iter=cfg["sinkhorn.max_iter"])
    timings["sinkhorn_s"] = time.perf_counter() - start
    _write_csv(
        out / "sinkhorn.csv",
        ["eps", "d_eps_sq", "iterations", "final_residual", "converged"],
        [[eps, 2.0 * report.cost if report.converged else math.nan,
          report.iterations, report.final_residual, int(report.converged)]],
    )
    _write_manifest(out, cfg, "sinkhorn", timings)
    return 0 if report.converged else 2


def _cmd_sweep(cfg: dict, out: Path) -> int:
    grid = build_grid(cfg)
    rho0 = _build_measure(cfg, grid, "init")
    spec = build_energy(cfg, grid)
    alphas = list(cfg["sweep.alphas"])
    taus = list(cfg["sweep.taus"])
    t_end = _positive(cfg, "sweep.t_end")
    timings = {}
    start = time.perf_counter()
    rows = run_sweep(
        rho0, spec, alphas, taus, t_end, grid,
        inner_tol=cfg["solver.inner_tol"],
        inner_max_iter=cfg["solver.inner_max_iter"],
        newton_tol=cfg["solver.newton_tol"],
        refine=cfg["sweep.refine"],
    )
    timings["sweep_s"] = time.perf_counter() - start
    _write_sweep(out / "sweep.csv", rows)
    _write_manifest(out, cfg, "sweep", timings)
    return 0


_DISPATCH = {
    "flow": _cmd_flow,
    "pde": _cmd_pde,
    "compare": _cmd_compare,
    "sinkhorn": _cmd_sinkhorn,
    "sweep": _cmd_sweep,
}


def run(command: str, config_path, out=None, overrides=()) -> int:
    """Programmatic equivalent of the command line; returns the exit status."""
    argv = [command, "--config", str(config_path)]
    for item in overrides:
        argv += ["--set", item]
    if out is not None:
        argv += ["--out", str(out)]
    return main(argv)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="entropic-jko",
        description="Entropic JKO flows, reference PDE solves and convergence sweeps on the torus.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to a key-value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    parser.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.set)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return 1
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    out = Path(args.out) if args.out else Path(cfg["output.dir"])
    cfg["output.dir"] = str(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"i/o error: cannot create output directory {out}: {exc}", file=sys.stderr)
        return 3

    try:
        return _DISPATCH[args.command](cfg, out)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        try:
            (out / "error_report.txt").write_text(f"config error: {exc}\n", encoding="utf-8")
        except OSError:
            pass
        return 1
    except ConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        try:
            (out / "error_report.txt").write_text(str(exc) + "\n", encoding="utf-8")
        except OSError:
            pass
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
