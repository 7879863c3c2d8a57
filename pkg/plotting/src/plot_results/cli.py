"""plot_results: render a misslin results CSV to an image file.

    plot_results --csv results.csv --out fig.png --y excess
                 [--scenario lda-mcar] [--classifiers id1,id2,...]

Exits 0 on success, 2 on schema or argument problems (with a column
diagnostic on stderr).
"""

from __future__ import annotations

import argparse
import sys

from . import PlotSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plot_results", description=__doc__)
    parser.add_argument("--csv", required=True, help="results CSV (frozen misslin schema)")
    parser.add_argument("--out", required=True, help="output image path (png recommended)")
    parser.add_argument("--y", choices=["risk", "excess"], default="excess", dest="y_mode")
    parser.add_argument("--scenario", default=None, help="keep only this scenario")
    parser.add_argument(
        "--classifiers", default=None, help="comma-separated include list of classifier ids"
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    classifiers = (
        tuple(c.strip() for c in args.classifiers.split(",") if c.strip())
        if args.classifiers
        else None
    )
    spec = PlotSpec(args.csv, args.out, args.y_mode, args.scenario, classifiers)
    try:
        render(spec)
    except (SchemaError, OSError) as exc:
        print(f"plot_results: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
