"""Command-line front end: render one figure per invocation.

Usage::

    stablequad-figures KIND --out image.png INPUT [INPUT ...]

Exit codes: 0 on success, 1 when an input is missing or does not match
its schema, 2 on usage errors.
"""

import argparse
import sys

from .io import SchemaError
from .render import KINDS, FigureSpec, render


def _parser():
    parser = argparse.ArgumentParser(
        prog="stablequad-figures",
        description="render a figure from stablequad output files",
    )
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("inputs", nargs="+", metavar="INPUT",
                        help="trajectory CSV, sweep CSV, or model JSON (kind-dependent)")
    parser.add_argument("--out", required=True, help="image path (.png or .svg)")
    parser.add_argument("--style-seed", type=int, default=0,
                        help="seed for stable ids in vector output")
    return parser


def main(argv=None):
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        out = render(FigureSpec(kind=args.kind, inputs=args.inputs, out=args.out),
                     style_seed=args.style_seed)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


def entry():
    raise SystemExit(main())
