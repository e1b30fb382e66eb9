"""Command-line entry point: ``nlwave <command> <scenario> [options]``."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .errors import ConfigError
from .report import text_table
from .runner import run_scenario

THREADS_ENV = "NLWAVE_THREADS"


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlwave",
        description="Spectral solvers for wave equations with nonlocal initial conditions.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve-linear": "solve the linear problem and check residuals",
        "solve-nonlinear": "run the Picard iteration for a nonlinear scenario",
        "verify": "identity, residual, oracle and estimate suites",
        "bench": "time the linear solve across thread counts",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("scenario", help="path to a scenario JSON file or the name of a shipped scenario")
        p.add_argument("--out", type=Path, default=None, help="directory for report artifacts")
        p.add_argument("--threads", type=int, default=_default_threads(),
                       help=f"worker threads for the mode loop (default ${THREADS_ENV} or 1)")
        p.add_argument("--oracle-fine", type=int, default=None, help="RK4 refinement factor of the oracle")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--quiet", action="store_true", help="do not print the text table")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    if args.oracle_fine is not None and args.oracle_fine < 4:
        print("error: --oracle-fine must be at least 4", file=sys.stderr)
        return 2
    try:
        report, code = run_scenario(args.scenario, args.command, args.threads, args.oracle_fine,
                                    args.seed, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for text in report.get("warnings", []):
        print(f"warning: {text}", file=sys.stderr)
    if not args.quiet:
        sys.stdout.write(text_table(report))
    return code


if __name__ == "__main__":
    sys.exit(main())
