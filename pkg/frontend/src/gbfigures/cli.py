"""Script entry point: render one figure from CSV inputs.

    gbattery-figures --fig fig3 --in outdir --out fig3.png

`--in` points at a directory holding sweep.csv / trace.csv (or directly
at one CSV file); `--out` is the image path.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import FIGURE_IDS, FigureJob, SchemaError, render


def _locate(in_path: Path, name: str) -> Path | None:
    if in_path.is_file():
        return in_path if in_path.name == name else None
    candidate = in_path / name
    return candidate if candidate.exists() else None


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="gbattery-figures")
    parser.add_argument("--fig", choices=FIGURE_IDS, required=True)
    parser.add_argument("--in", dest="input", required=True,
                        help="directory with sweep.csv/trace.csv, or one CSV file")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--protocol-exponent", type=int, default=11)
    args = parser.parse_args(argv)

    in_path = Path(args.input)
    job = FigureJob(
        figure_id=args.fig,
        sweep_csv=_locate(in_path, "sweep.csv"),
        trace_csv=_locate(in_path, "trace.csv"),
        output=Path(args.out),
        protocol_exponent=args.protocol_exponent,
    )
    try:
        render(job)
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
