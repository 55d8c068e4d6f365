"""Scenario runners: verification suite, refinement probes, truncation sweep.

Reports go to stdout as human-readable text and beside the scenario file
(or into ``--out``) as CSV plus a structured text file.  CSV bytes are a
pure function of the scenario content: wall times appear only in the
text output, so fixed seeds give byte-identical CSV reports.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checks import CheckContext, CheckResult, resolve_check_names, run_check
from .cocycle import cocycle_continuity_probe, stop_cocycle
from .errors import QstopError, ScenarioError
from .fock import SliceConfig, exponential_inner_oracle, exponential_vector, joint_vector
from .sampling import random_fock_vector, random_state
from .scenario import Scenario
from .stoptime import coarsen, convergence_gap


@dataclass(frozen=True)
class Report:
    scenario: str
    results: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)


def materialize_instances(scenario: Scenario) -> list[CheckContext]:
    """Build one check context per seeded instance.

    Instance seeds are spawned from the scenario seed, so the whole run is
    reproducible from the file alone.
    """
    root = np.random.SeedSequence(scenario.seed)
    children = root.spawn(scenario.instances)
    contexts = []
    for child in children:
        rng = np.random.default_rng(child)
        stop_times = {
            spec.label: spec.build(scenario.cfg, rng) for spec in scenario.stop_times
        }
        cocycles = {
            spec.label: spec.build(scenario.cfg, rng) for spec in scenario.cocycles
        }
        contexts.append(
            CheckContext(
                cfg=scenario.cfg,
                stop_times=stop_times,
                cocycles=cocycles,
                rng=rng,
                tol=scenario.tolerance,
            )
        )
    return contexts


def run_verify(scenario: Scenario) -> Report:
    names = resolve_check_names(scenario.check_names)
    contexts = materialize_instances(scenario)
    results = []
    for name in names:
        try:
            results.append(run_check(name, contexts, scenario.tolerance))
        except QstopError as exc:
            raise ScenarioError(f"check '{name}': {exc}") from exc
    return Report(scenario=scenario.name, results=tuple(results))


def report_csv(report: Report) -> str:
    lines = ["check,anchor,max_entry_deviation,operator_norm_deviation,tolerance,status"]
    for r in report.results:
        anchor = r.anchor.replace('"', "'")
        lines.append(
            f'{r.name},"{anchor}",{r.max_entry:.12e},{r.op_norm:.12e},'
            f"{r.tolerance:.3e},{'pass' if r.passed else 'FAIL'}"
        )
    return "\n".join(lines) + "\n"


def report_text(report: Report, wall_times: bool = True) -> str:
    width = max(len(r.name) for r in report.results) if report.results else 10
    lines = [f"scenario: {report.scenario}"]
    for r in report.results:
        status = "pass" if r.passed else "FAIL"
        line = (
            f"  {r.name:<{width}}  max|.| {r.max_entry:.3e}  "
            f"|.|_2 {r.op_norm:.3e}  tol {r.tolerance:.1e}  {status}"
        )
        if wall_times:
            line += f"  ({r.seconds * 1000.0:7.1f} ms)"
        lines.append(line)
    lines.append(f"result: {'all checks pass' if report.passed else 'CHECK FAILURES'}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# refinement experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergeRow:
    level: int
    boundaries: tuple[int, ...]
    max_gap: float
    max_cocycle_dev: float


@dataclass(frozen=True)
class ConvergeTable:
    scenario: str
    rows: tuple[ConvergeRow, ...]
    monotone: bool

    @property
    def passed(self) -> bool:
        return self.monotone


def dyadic_boundaries(n_slots: int, level: int) -> tuple[int, ...]:
    """2^level boundaries, nested across levels, last one at n_slots."""
    count = 2**level
    return tuple(sorted({max(1, math.ceil(n_slots * k / count)) for k in range(1, count + 1)}))


def run_converge(scenario: Scenario, levels: int | None = None) -> ConvergeTable:
    if scenario.converge is None:
        raise ScenarioError("scenario has no [converge] section")
    spec = scenario.converge
    levels = levels or spec.levels
    if levels < 2:
        raise ScenarioError("refinement needs at least 2 levels")
    contexts = materialize_instances(scenario)
    ctx = contexts[0]
    if spec.target not in ctx.stop_times:
        raise ScenarioError(f"converge target '{spec.target}' is not a stop time label")
    if spec.cocycle not in ctx.cocycles:
        raise ScenarioError(f"converge cocycle '{spec.cocycle}' is not a cocycle label")
    if spec.modulus_continuity:
        generators = {c.label: c.generator for c in scenario.cocycles}
        if generators.get(spec.cocycle) not in ("smooth", "explicit"):
            raise ScenarioError(
                "refinement probes compare cocycle values at nearby times; with "
                "modulus_continuity on, the probed cocycle must use the 'smooth' "
                "generator (or an explicit matrix); set modulus_continuity = false "
                "to override"
            )
    target = ctx.stop_times[spec.target]
    cocycle = ctx.cocycles[spec.cocycle]
    cfg = scenario.cfg

    gap_probes = ctx.probe_vectors(count=3, ampliated=False)
    joint_probes = [random_fock_vector(cfg, ctx.rng, ampliated=True) for _ in range(3)]
    joint_probes.append(
        joint_vector(
            cfg,
            random_state(ctx.rng, cfg.k_ini),
            exponential_vector(cfg, _probe_step(ctx)),
        )
    )

    approximants = []
    boundary_sets = []
    for level in range(1, levels + 1):
        bounds = dyadic_boundaries(cfg.n_slots, level)
        boundary_sets.append(bounds)
        approximants.append(coarsen(target, bounds))

    cocycle_rows = cocycle_continuity_probe(cocycle, approximants, target, joint_probes)
    rows = []
    for level, bounds, s_n, cdevs in zip(
        range(1, levels + 1), boundary_sets, approximants, cocycle_rows
    ):
        gaps = convergence_gap(s_n, target, gap_probes)
        rows.append(
            ConvergeRow(
                level=level,
                boundaries=bounds,
                max_gap=max(g for _, g in gaps),
                max_cocycle_dev=max(cdevs),
            )
        )
    monotone = all(
        rows[i + 1].max_gap <= rows[i].max_gap + 1e-12
        and rows[i + 1].max_cocycle_dev <= rows[i].max_cocycle_dev + 1e-12
        for i in range(len(rows) - 1)
    )
    return ConvergeTable(scenario=scenario.name, rows=tuple(rows), monotone=monotone)


def _probe_step(ctx: CheckContext):
    from .sampling import random_step_function

    return random_step_function(ctx.cfg, ctx.rng, 0.3)


def converge_csv(table: ConvergeTable) -> str:
    lines = ["level,boundaries,max_gap,max_cocycle_deviation"]
    for r in table.rows:
        bounds = " ".join(str(b) for b in r.boundaries)
        lines.append(f'{r.level},"{bounds}",{r.max_gap:.12e},{r.max_cocycle_dev:.12e}')
    return "\n".join(lines) + "\n"


def converge_text(table: ConvergeTable) -> str:
    lines = [f"scenario: {table.scenario} (refinement probe)"]
    for r in table.rows:
        lines.append(
            f"  level {r.level}: boundaries {list(r.boundaries)}  "
            f"max gap {r.max_gap:.3e}  max cocycle dev {r.max_cocycle_dev:.3e}"
        )
    lines.append(
        "result: "
        + ("non-increasing along refinement" if table.monotone else "NOT MONOTONE")
    )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# truncation sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    cap: int
    pair: int
    error: float


@dataclass(frozen=True)
class SweepTable:
    scenario: str
    rows: tuple[SweepRow, ...]
    monotone: bool

    @property
    def passed(self) -> bool:
        return self.monotone


def run_truncation_sweep(scenario: Scenario, caps=None) -> SweepTable:
    if scenario.sweep is None:
        raise ScenarioError("scenario has no [sweep] section")
    spec = scenario.sweep
    caps = tuple(caps) if caps else spec.caps
    if list(caps) != sorted(set(caps)):
        raise ScenarioError("caps must be strictly increasing")
    if not spec.pairs:
        raise ScenarioError("sweep needs at least one (f, g) pair")
    base = scenario.cfg
    rows = []
    errors: dict[int, list[float]] = {i: [] for i in range(len(spec.pairs))}
    for cap in caps:
        cfg = SliceConfig(
            n_slots=base.n_slots,
            dt=base.dt,
            d=base.d,
            cap=cap,
            k_ini=1,
            max_fock_dim=base.max_fock_dim,
        )
        for i, (f_raw, g_raw) in enumerate(spec.pairs):
            f = scenario.step_function(cfg, f_raw)
            g = scenario.step_function(cfg, g_raw)
            kernel = exponential_inner_oracle(cfg, f, g)
            exact = np.exp(f.inner(g))
            err = float(abs(kernel - exact))
            errors[i].append(err)
            rows.append(SweepRow(cap=cap, pair=i, error=err))
    monotone = all(
        errs[i + 1] <= errs[i] + 1e-15
        for errs in errors.values()
        for i in range(len(errs) - 1)
    )
    return SweepTable(scenario=scenario.name, rows=tuple(rows), monotone=monotone)


def sweep_csv(table: SweepTable) -> str:
    lines = ["cap,pair,kernel_error"]
    for r in table.rows:
        lines.append(f"{r.cap},{r.pair},{r.error:.12e}")
    return "\n".join(lines) + "\n"


def sweep_text(table: SweepTable) -> str:
    lines = [f"scenario: {table.scenario} (truncation sweep)"]
    for r in table.rows:
        lines.append(f"  cap {r.cap}  pair {r.pair}  |<eps(f),eps(g)> - exp<f,g>| = {r.error:.6e}")
    lines.append(
        "result: " + ("monotone non-increasing in cap" if table.monotone else "NOT MONOTONE")
    )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# file output
# ---------------------------------------------------------------------------


def write_reports(
    stem: str,
    out_dir: Path,
    csv_body: str | None,
    text_body: str | None,
) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if csv_body is not None:
        p = out_dir / f"{stem}.report.csv"
        p.write_text(csv_body)
        written.append(p)
    if text_body is not None:
        p = out_dir / f"{stem}.report.txt"
        p.write_text(text_body)
        written.append(p)
    return written
