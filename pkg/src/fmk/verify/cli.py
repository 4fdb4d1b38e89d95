"""Command line entry point: ``fmk check``, ``fmk export``, ``fmk models``."""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace

from ..errors import FmkError
from ..models import BUILTIN_NAMES
from .modelfile import export_model, load_model
from .report import DEFAULT_TOL, run_suite
from .suites import SUITES, checks_for

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _param(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"parameter {name!r}: {value!r} is not a number") from err


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fmk", description="Numerical checks for F-manifolds with eventual identities.")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="run a check suite on a model")
    check.add_argument("--model", required=True, help="model file path or builtin:<name>")
    check.add_argument("--suite", default="all", choices=SUITES + ("all",))
    check.add_argument("--seed", type=int, default=42)
    check.add_argument("--points", type=int, default=100)
    check.add_argument("--tol", type=float, default=DEFAULT_TOL)
    check.add_argument("--report", help="write the JSON report here instead of stdout")
    check.add_argument("--list-checks", action="store_true", help="list check names and anchors, then exit")
    check.add_argument("--timing", action="store_true", help="include wall-clock time in the report")
    check.add_argument("--param", type=_param, action="append", default=[], metavar="NAME=VALUE",
                       help="override a model parameter")

    export = sub.add_parser("export", help="write a built-in model as a model file")
    export.add_argument("name", choices=BUILTIN_NAMES)
    export.add_argument("--out", help="output path (stdout when omitted)")
    export.add_argument("--param", type=_param, action="append", default=[], metavar="NAME=VALUE")

    sub.add_parser("models", help="list built-in models")
    return parser


def _check(args) -> int:
    if args.points < 1:
        print("error: --points must be positive", file=sys.stderr)
        return EXIT_CONFIG
    model = load_model(args.model, dict(args.param))
    if args.list_checks:
        for c in checks_for(model, args.suite):
            print(f"{c.name}\t{c.anchor}")
        return EXIT_OK
    start = time.perf_counter()
    report = run_suite(model, args.suite, args.seed, args.points, args.tol)
    elapsed = time.perf_counter() - start
    if args.timing:
        report = replace(report, wall_clock=round(elapsed, 3))
    text = report.to_json()
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text)
        for c in report.checks:
            shown = "n/a" if c.max_residual is None else f"{c.max_residual:.3e}"
            print(f"{c.status.upper():4}  {c.name}  max={shown}  tol={c.tolerance:.1e}")
        summary = report.as_dict()["summary"]
        print(f"{summary['passed']}/{summary['checks']} checks passed")
    else:
        sys.stdout.write(text)
    print(f"elapsed {elapsed:.2f} s", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "check":
            return _check(args)
        if args.command == "export":
            text = export_model(args.name, args.out, **dict(args.param))
            if not args.out:
                sys.stdout.write(text)
            return EXIT_OK
        for name in BUILTIN_NAMES:
            print(name)
        return EXIT_OK
    except FmkError as err:
        gate = getattr(err, "gate", None)
        prefix = f"[{gate}] " if gate else ""
        print(f"error: {prefix}{err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
