"""Command-line entry: localsgd-plot --csv sweep.csv --out figure.png

Exit codes: 0 rendered cleanly, 1 input/usage error, 2 rendered but one or
more panels had incomplete series (warning annotations in the image).
"""

from __future__ import annotations

import argparse
import sys

from .plotting import PlotSpec, SchemaError, render_figure


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def main(argv=None) -> int:
    parser = _Parser(prog="localsgd-plot",
                     description="multi-panel tuned-suboptimality figures")
    parser.add_argument("--csv", nargs="+", required=True, help="sweep CSV file(s)")
    parser.add_argument("--out", required=True, help="output image (.png or .svg)")
    parser.add_argument("--panels", default="M,K",
                        help="panel grid keys (only 'M,K' is supported)")
    parser.add_argument("--logy", action="store_true", default=True)
    parser.add_argument("--no-logy", dest="logy", action="store_false")
    parser.add_argument("--title", default=None)
    args = parser.parse_args(argv)
    if args.panels != "M,K":
        print(f"error: unsupported panel keys {args.panels!r}", file=sys.stderr)
        return 1
    spec = PlotSpec(csv_paths=args.csv, out_path=args.out, logy=args.logy,
                    title=args.title)
    try:
        report = render_figure(spec)
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for panel, algorithm in report.missing:
        print(f"warning: panel M={panel[0]}, K={panel[1]} has an incomplete "
              f"series for {algorithm!r}", file=sys.stderr)
    print(f"wrote {report.out_path} ({len(report.panels)} panels, "
          f"{report.n_rows} rows, {report.n_deduplicated} duplicates dropped)")
    return 0 if report.ok else 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
