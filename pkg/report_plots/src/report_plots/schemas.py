"""Schema checks for the run-directory CSV files."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


class SchemaError(ValueError):
    """A required file, column or value shape is missing or malformed."""


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    if not path.exists():
        raise SchemaError(f"missing required file: {path.name}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path.name}: empty file")
    header = rows[0]
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:]])
    except ValueError as exc:
        raise SchemaError(f"{path.name}: non-numeric data ({exc})") from exc
    if data.ndim != 2 or data.shape[0] == 0:
        raise SchemaError(f"{path.name}: no data rows")
    if data.shape[1] != len(header):
        raise SchemaError(f"{path.name}: ragged rows")
    return header, data


def require_columns(name: str, header: list[str], needed: list[str]) -> dict[str, int]:
    index = {}
    for col in needed:
        if col not in header:
            raise SchemaError(f"{name}: missing column {col!r}")
        index[col] = header.index(col)
    return index


def read_trajectory(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """Returns (times, states) from a snapshot file: t column then densities."""
    header, data = read_csv(path)
    if not header or header[0] != "t":
        raise SchemaError(f"{path.name}: missing column 't' (first column)")
    if len(header) < 2:
        raise SchemaError(f"{path.name}: no density columns")
    return data[:, 0], data[:, 1:]


def read_sweep(path: Path) -> dict[str, np.ndarray]:
    header, data = read_csv(path)
    cols = require_columns(
        path.name, header,
        ["alpha", "tau", "eps", "n", "terminal_l1", "mean_inner_iterations"],
    )
    return {name: data[:, idx] for name, idx in cols.items()}


def require_manifest(run_dir: Path) -> dict[str, str]:
    manifest = run_dir / "manifest"
    if not manifest.exists():
        raise SchemaError("missing required file: manifest")
    out = {}
    for line in manifest.read_text(encoding="utf-8").splitlines():
        if "=" in line:
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out
