#!/usr/bin/env python3
"""Run every bundled scenario and print a one-line summary per run.

Writes the usual report files beside each scenario; exits non-zero if
anything fails, so this doubles as a local CI entry point.
"""

import sys
from pathlib import Path

from qstop.harness import run_converge, run_truncation_sweep, run_verify
from qstop.scenario import load_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def main() -> int:
    failures = 0
    for path in sorted(SCENARIOS.glob("*.toml")):
        scenario = load_scenario(path)
        report = run_verify(scenario)
        worst = max((r.max_entry for r in report.results), default=0.0)
        status = "pass" if report.passed else "FAIL"
        print(f"verify   {scenario.name:<22} {len(report.results):2d} checks  "
              f"worst {worst:.3e}  {status}")
        failures += 0 if report.passed else 1
        if scenario.converge is not None:
            table = run_converge(scenario)
            status = "pass" if table.passed else "FAIL"
            print(f"converge {scenario.name:<22} levels "
                  f"{[f'{r.max_gap:.2e}' for r in table.rows]}  {status}")
            failures += 0 if table.passed else 1
        if scenario.sweep is not None:
            table = run_truncation_sweep(scenario)
            status = "pass" if table.passed else "FAIL"
            print(f"sweep    {scenario.name:<22} "
                  f"{len(table.rows)} rows  {status}")
            failures += 0 if table.passed else 1
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
