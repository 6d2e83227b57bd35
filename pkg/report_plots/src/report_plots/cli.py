"""`render_report <run-dir> [--figures list] [--out dir]`: CSVs in, PNGs out."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import FIGURES, PlotJob, render
from .schemas import SchemaError


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="render_report",
        description="Render static figures from an entropic-jko run directory.",
    )
    parser.add_argument("run_dir", help="a run directory produced by the solver CLI")
    parser.add_argument(
        "--figures",
        default=None,
        help=f"comma-separated subset of: {', '.join(FIGURES)} (default: all applicable)",
    )
    parser.add_argument("--out", default=None, help="output directory (default: run dir)")
    args = parser.parse_args(argv)

    figures = tuple(f.strip() for f in args.figures.split(",") if f.strip()) if args.figures else ()
    try:
        job = PlotJob(run_dir=Path(args.run_dir), figures=figures,
                      out_dir=Path(args.out) if args.out else None)
        written = render(job)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
