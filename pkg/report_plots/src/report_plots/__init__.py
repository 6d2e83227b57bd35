"""Offline figure rendering for entropic-jko run directories.

Reads the CLI's CSV outputs (trajectory.csv, reference.csv, comparison.csv,
sweep.csv) plus the manifest, and renders deterministic static PNGs: density
overlays, log-log error curves per alpha, and iteration-count tables. No
in-process coupling to the solver package: files in, files out.
"""

__version__ = "0.1.0"

from .figures import FIGURES, PlotJob, render
from .schemas import SchemaError

__all__ = ["FIGURES", "PlotJob", "render", "SchemaError"]
