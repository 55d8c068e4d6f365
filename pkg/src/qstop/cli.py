"""Command-line front end.

Subcommands::

    qstop verify   <scenario.toml>                 run the named checks
    qstop converge <scenario.toml> --levels L      refinement probe
    qstop sweep    <scenario.toml> --caps 1,2,3    truncation sweep

Exit codes: 0 all checks pass, 1 a check or monotonicity assertion failed,
2 scenario or input error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .errors import QstopError, ScenarioError
from .harness import (
    converge_csv,
    converge_text,
    report_csv,
    report_text,
    run_converge,
    run_truncation_sweep,
    run_verify,
    sweep_csv,
    sweep_text,
    write_reports,
)
from .scenario import load_scenario

EXIT_PASS = 0
EXIT_CHECK_FAILURE = 1
EXIT_INPUT_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qstop",
        description="Verify stop-time and stopped-cocycle operator identities "
        "on a truncated sliced Fock space.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", type=Path, help="scenario file (TOML)")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--tol", type=float, default=None, help="override the tolerance")
        p.add_argument(
            "--out", type=Path, default=None,
            help="directory for report files (default: beside the scenario)",
        )
        p.add_argument(
            "--format", choices=("csv", "text", "both"), default="both",
            help="which report files to write",
        )

    common(sub.add_parser("verify", help="run the identity checks"))

    p_conv = sub.add_parser("converge", help="run the refinement probe")
    common(p_conv)
    p_conv.add_argument("--levels", type=int, default=None, help="refinement levels")

    p_sweep = sub.add_parser("sweep", help="run the truncation sweep")
    common(p_sweep)
    p_sweep.add_argument(
        "--caps", type=str, default=None, help="comma-separated occupation caps"
    )
    return parser


def _load(args):
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    if args.tol is not None:
        scenario = dataclasses.replace(scenario, tolerance=args.tol)
    return scenario


def _emit(args, stem_suffix, csv_body, text_body):
    out_dir = args.out if args.out is not None else args.scenario.parent
    stem = args.scenario.stem + stem_suffix
    csv_out = csv_body if args.format in ("csv", "both") else None
    text_out = text_body if args.format in ("text", "both") else None
    for path in write_reports(stem, out_dir, csv_out, text_out):
        print(f"wrote {path}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = _load(args)
        if args.command == "verify":
            report = run_verify(scenario)
            print(report_text(report), end="")
            _emit(args, "", report_csv(report), report_text(report))
            return EXIT_PASS if report.passed else EXIT_CHECK_FAILURE
        if args.command == "converge":
            table = run_converge(scenario, levels=args.levels)
            print(converge_text(table), end="")
            _emit(args, ".converge", converge_csv(table), converge_text(table))
            return EXIT_PASS if table.passed else EXIT_CHECK_FAILURE
        if args.command == "sweep":
            caps = (
                [int(c) for c in args.caps.split(",")] if args.caps else None
            )
            table = run_truncation_sweep(scenario, caps=caps)
            print(sweep_text(table), end="")
            _emit(args, ".sweep", sweep_csv(table), sweep_text(table))
            return EXIT_PASS if table.passed else EXIT_CHECK_FAILURE
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except QstopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
