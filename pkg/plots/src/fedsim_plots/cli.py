"""Command-line entry: ``plots <kind> <in_dir> <out_file.png>``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import KINDS, EmptyDataError, PlotError, PlotJob, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plots", description="Render figures from fedsim CSV outputs."
    )
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("in_dir", help="run or sweep directory with the input CSVs")
    parser.add_argument("out_file", help="output PNG path")
    args = parser.parse_args(argv)

    try:
        render(PlotJob(args.kind, Path(args.in_dir), Path(args.out_file)))
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except EmptyDataError as exc:
        print(f"empty data: {exc}", file=sys.stderr)
        return 3
    except PlotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
