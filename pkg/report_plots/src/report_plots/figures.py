"""Figure builders: pure functions of the run directory's files.

Fixed styles, fixed canvas, no timestamps; rendering the same directory twice
must produce byte-identical PNGs.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schemas import SchemaError, read_sweep, read_trajectory, require_manifest

_SAVE_KW = dict(dpi=110, metadata={"Software": "report-plots"})


def _new_axes(width=6.4, height=4.2):
    fig, ax = plt.subplots(figsize=(width, height))
    return fig, ax


def render_overlay(run_dir: Path, out_path: Path) -> None:
    """Terminal density of the proximal flow over the PDE reference."""
    t_flow, flow = read_trajectory(run_dir / "trajectory.csv")
    t_ref, ref = read_trajectory(run_dir / "reference.csv")
    n = flow.shape[1]
    if ref.shape[1] != n:
        raise SchemaError("reference.csv: density column count differs from trajectory.csv")
    x = np.arange(n) / n
    fig, ax = _new_axes()
    ax.plot(x, flow[0], color="0.6", lw=1.0, label=f"initial (t={t_flow[0]:g})")
    ax.plot(x, flow[-1], color="C0", lw=1.8, label=f"proximal flow (t={t_flow[-1]:g})")
    ax.plot(x, ref[-1], color="C3", lw=1.2, ls="--", label=f"reference PDE (t={t_ref[-1]:g})")
    ax.set_xlabel("x")
    ax.set_ylabel("density")
    ax.set_title("terminal snapshot overlay")
    ax.legend(frameon=False, fontsize=9)
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)


def render_error_curves(run_dir: Path, out_path: Path) -> None:
    """Log-log terminal error vs tau, one line per alpha."""
    sweep = read_sweep(run_dir / "sweep.csv")
    fig, ax = _new_axes()
    for i, alpha in enumerate(np.unique(sweep["alpha"])):
        mask = sweep["alpha"] == alpha
        taus, errs = sweep["tau"][mask], sweep["terminal_l1"][mask]
        order = np.argsort(taus)
        ax.loglog(taus[order], errs[order], marker="o", color=f"C{i}",
                  label=f"alpha = {alpha:g}")
    ref_taus = np.sort(np.unique(sweep["tau"]))
    scale = sweep["terminal_l1"].max() / ref_taus.max()
    ax.loglog(ref_taus, scale * ref_taus, color="0.7", ls=":", label="slope 1")
    ax.set_xlabel("tau")
    ax.set_ylabel("terminal L1 error vs reference")
    ax.set_title("convergence under tau refinement")
    ax.legend(frameon=False, fontsize=9)
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)


def render_iterations(run_dir: Path, out_path: Path) -> None:
    """Mean inner-iteration counts as a table, rows = alpha, columns = tau."""
    sweep = read_sweep(run_dir / "sweep.csv")
    alphas = np.unique(sweep["alpha"])
    taus = np.sort(np.unique(sweep["tau"]))[::-1]
    cells = []
    for alpha in alphas:
        row = []
        for tau in taus:
            mask = (sweep["alpha"] == alpha) & (sweep["tau"] == tau)
            row.append(f"{sweep['mean_inner_iterations'][mask][0]:.0f}" if mask.any() else "-")
        cells.append(row)
    fig, ax = _new_axes(6.4, 1.1 + 0.5 * len(alphas))
    ax.axis("off")
    table = ax.table(
        cellText=cells,
        rowLabels=[f"alpha={a:g}" for a in alphas],
        colLabels=[f"tau={t:g}" for t in taus],
        loc="center",
        cellLoc="center",
    )
    table.scale(1.0, 1.4)
    ax.set_title("mean inner Sinkhorn iterations per step", pad=18)
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)


FIGURES = {
    "overlay": (render_overlay, ("trajectory.csv", "reference.csv")),
    "error_curves": (render_error_curves, ("sweep.csv",)),
    "iterations": (render_iterations, ("sweep.csv",)),
}


@dataclass
class PlotJob:
    run_dir: Path
    figures: tuple[str, ...] = ()
    out_dir: Path | None = None

    def __post_init__(self):
        self.run_dir = Path(self.run_dir)
        if self.out_dir is None:
            self.out_dir = self.run_dir
        self.out_dir = Path(self.out_dir)
        unknown = [f for f in self.figures if f not in FIGURES]
        if unknown:
            raise SchemaError(f"unknown figure selection: {', '.join(unknown)}")


def render(job: PlotJob) -> list[Path]:
    """Render the selected figures (or every applicable one); fail fast otherwise."""
    require_manifest(job.run_dir)
    selected = job.figures
    if not selected:
        selected = tuple(
            name
            for name, (_, needs) in FIGURES.items()
            if all((job.run_dir / f).exists() for f in needs)
        )
        if not selected:
            raise SchemaError(
                "no renderable figures: the directory has none of the known CSV layouts"
            )
    job.out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name in selected:
        builder, _ = FIGURES[name]
        out_path = job.out_dir / f"{name}.png"
        builder(job.run_dir, out_path)
        written.append(out_path)
    return written
