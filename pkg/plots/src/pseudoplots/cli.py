"""Command line front end: render --sweep ... --events ... --out ...

Exit codes: 0 success, 2 input problem (unreadable file, schema mismatch,
gain value referenced but absent from the sweep), 3 output failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .csvio import SchemaError
from .figures import FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render spectra panels from sweep/events CSV files, "
        "one image per gain value, plus an optional manifold map.",
    )
    parser.add_argument("--sweep", required=True, help="sweep CSV path")
    parser.add_argument("--events", required=True, help="crossing-events CSV path")
    parser.add_argument("--manifold", help="optional manifold-trace CSV path")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument(
        "--format",
        choices=("png", "svg"),
        default="png",
        help="image format (default png)",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        sweep=Path(args.sweep),
        events=Path(args.events),
        manifold=Path(args.manifold) if args.manifold else None,
        out_dir=Path(args.out),
        fmt=args.format,
    )
    try:
        written = render(spec)
    except SchemaError as err:
        print(f"schema error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"output error: {err}", file=sys.stderr)
        return 3
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
