"""Command-line entry point: ``figures <kind> --in CSV [--verdict JSON] --out IMG``.

Exit codes: 0 on success, 2 for usage errors, missing files, or series that
fail schema validation.  On success one JSON line describing the rendered
figure is printed to stdout; errors go to stderr and no image is written.
"""

import argparse
import json
import sys

from .io import SchemaError
from .render import KINDS, FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figures",
        description="Render a figure from a persisted CSV series.")
    parser.add_argument("kind", choices=KINDS, help="figure kind to render")
    parser.add_argument("--in", dest="input_path", required=True,
                        metavar="CSV", help="input series file")
    parser.add_argument("--verdict", dest="verdict_path", metavar="JSON",
                        help="verdict file; rate_loglog annotates its slope")
    parser.add_argument("--out", dest="output_path", required=True,
                        metavar="IMG", help="output image file")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2

    spec = FigureSpec(kind=args.kind, input_path=args.input_path,
                      output_path=args.output_path,
                      verdict_path=args.verdict_path)
    try:
        result = render(spec)
    except (SchemaError, OSError, json.JSONDecodeError) as exc:
        print(f"figures error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({"kind": result.kind, "file": result.output_path,
                      "annotations": result.annotations}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
