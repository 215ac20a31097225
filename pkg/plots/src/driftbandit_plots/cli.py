"""Command-line figure rendering from harness output files."""

from __future__ import annotations

import argparse
import sys

from .figures import plot_exponent_fit, plot_regret_curves, plot_shift_overlay
from .io import CrossCheckError


def _common(p: argparse.ArgumentParser, many_inputs: bool) -> None:
    p.add_argument("--in", dest="inputs", nargs="+" if many_inputs else 1,
                   required=True, help="summary.json path(s)")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--ci", type=float, default=0.95, help="confidence level for bands")
    p.add_argument("--cross-check", action="store_true",
                   help="re-derive annotated numbers from raw rows; exit nonzero on mismatch")
    p.add_argument("--svg", action="store_true", help="vector output instead of PNG")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="driftbandit-plot",
        description="Figures from driftbandit harness CSV/summary files",
    )
    sub = parser.add_subparsers(dest="kind", required=True)

    p_reg = sub.add_parser("regret", help="mean regret curves with confidence bands")
    _common(p_reg, many_inputs=True)
    p_reg.add_argument("--shifts", default=None, help="optional shift report to overlay")

    p_exp = sub.add_parser("exponent", help="log-log sweep with the fitted slope")
    _common(p_exp, many_inputs=False)

    p_shift = sub.add_parser("shifts", help="regret curves with shift overlay")
    _common(p_shift, many_inputs=True)
    p_shift.add_argument("--shifts", required=True, help="shift report to overlay")

    args = parser.parse_args(argv)
    try:
        if args.kind == "regret":
            out = plot_regret_curves(args.inputs, args.out, ci=args.ci,
                                     shifts_path=args.shifts,
                                     cross_check=args.cross_check, svg=args.svg)
        elif args.kind == "exponent":
            out = plot_exponent_fit(args.inputs[0], args.out,
                                    cross_check=args.cross_check, svg=args.svg)
        else:
            out = plot_shift_overlay(args.inputs, args.shifts, args.out, ci=args.ci,
                                     cross_check=args.cross_check, svg=args.svg)
    except CrossCheckError as exc:
        print(f"cross-check failed: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
