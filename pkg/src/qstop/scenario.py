"""Scenario files: grid, stop-time specs, cocycle specs, checks, seed.

Scenarios are structured text (TOML).  Dense matrices are row-major lists
of ``[re, im]`` pairs.  The seed fully determines every random draw, so a
scenario file is a complete, reproducible experiment description.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import QstopError, ScenarioError, StopTimeValidationError
from .fock import SliceConfig, StepFunction
from .sampling import random_smooth_unitary, random_stop_time, random_unitary
from .stoptime import DiscreteStopTime, make_deterministic, make_first_arrival, \
    pairs_to_matrix, stop_time_from_atom_dicts
from .cocycle import Cocycle, build_cocycle


@dataclass(frozen=True)
class StopTimeSpec:
    label: str
    kind: str  # deterministic | first_arrival | random | explicit
    params: dict

    def build(self, cfg: SliceConfig, rng: np.random.Generator) -> DiscreteStopTime:
        try:
            if self.kind == "deterministic":
                return make_deterministic(cfg, int(self.params["t"]))
            if self.kind == "first_arrival":
                return make_first_arrival(cfg, int(self.params["horizon"]))
            if self.kind == "random":
                return random_stop_time(cfg, rng, self.params["times"])
            if self.kind == "explicit":
                return stop_time_from_atom_dicts(cfg, self.params["atoms"])
        except KeyError as exc:
            raise ScenarioError(
                f"stop time '{self.label}': missing field {exc}"
            ) from exc
        except StopTimeValidationError as exc:
            raise ScenarioError(
                f"stop time '{self.label}' is invalid: {exc}"
            ) from exc
        raise ScenarioError(f"stop time '{self.label}': unknown kind '{self.kind}'")


@dataclass(frozen=True)
class CocycleSpec:
    label: str
    adaptedness: str  # identity | vacuum | projection
    generator: str  # haar | smooth | explicit
    params: dict

    def tail_projection(self, cfg: SliceConfig) -> np.ndarray:
        if self.adaptedness == "identity":
            return np.eye(cfg.d, dtype=complex)
        if self.adaptedness == "vacuum":
            return np.zeros((cfg.d, cfg.d), dtype=complex)
        if self.adaptedness == "projection":
            try:
                return pairs_to_matrix(self.params["p"], cfg.d)
            except KeyError as exc:
                raise ScenarioError(
                    f"cocycle '{self.label}': missing field {exc}"
                ) from exc
        raise ScenarioError(
            f"cocycle '{self.label}': unknown adaptedness '{self.adaptedness}'"
        )

    def build(self, cfg: SliceConfig, rng: np.random.Generator) -> Cocycle:
        dim = cfg.k_ini * cfg.slot_dim
        if self.generator == "haar":
            w = random_unitary(rng, dim)
        elif self.generator == "smooth":
            w = random_smooth_unitary(
                rng, dim, cfg.dt, scale=float(self.params.get("scale", 0.5))
            )
        elif self.generator == "explicit":
            try:
                w = pairs_to_matrix(self.params["matrix"], dim)
            except KeyError as exc:
                raise ScenarioError(
                    f"cocycle '{self.label}': missing field {exc}"
                ) from exc
        else:
            raise ScenarioError(
                f"cocycle '{self.label}': unknown generator '{self.generator}'"
            )
        return build_cocycle(cfg, self.tail_projection(cfg), w)


@dataclass(frozen=True)
class ConvergeSpec:
    target: str  # stop-time label
    cocycle: str  # cocycle label
    levels: int = 3
    modulus_continuity: bool = True


@dataclass(frozen=True)
class SweepSpec:
    caps: tuple[int, ...]
    pairs: tuple[tuple[list, list], ...]  # (f, g) per-slot channel values


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    instances: int
    cfg: SliceConfig
    stop_times: tuple[StopTimeSpec, ...]
    cocycles: tuple[CocycleSpec, ...]
    check_names: tuple[str, ...]
    tolerance: float
    converge: ConvergeSpec | None = None
    sweep: SweepSpec | None = None
    path: Path | None = None

    def step_function(self, cfg: SliceConfig, values) -> StepFunction:
        vals = np.zeros((cfg.n_slots, cfg.d), dtype=complex)
        for j, per_slot in enumerate(values):
            if j >= cfg.n_slots:
                raise ScenarioError("step function has more slots than the grid")
            for c, (re, im) in enumerate(per_slot):
                vals[j, c] = complex(re, im)
        return StepFunction(cfg, vals)


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ScenarioError(f"{where}: missing required key '{key}'")
    return table[key]


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ScenarioError(f"scenario file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: parse error: {exc}") from exc
    return parse_scenario(data, path=path)


def parse_scenario(data: dict, path: Path | None = None) -> Scenario:
    where = str(path) if path else "scenario"
    grid = _require(data, "grid", where)
    try:
        cfg = SliceConfig(
            n_slots=int(_require(grid, "n_slots", f"{where}.grid")),
            dt=float(_require(grid, "dt", f"{where}.grid")),
            d=int(_require(grid, "d", f"{where}.grid")),
            cap=int(_require(grid, "cap", f"{where}.grid")),
            k_ini=int(grid.get("k_ini", 1)),
            max_fock_dim=int(grid.get("max_fock_dim", 4096)),
        )
    except QstopError as exc:
        raise ScenarioError(f"{where}.grid: {exc}") from exc
    except ValueError as exc:
        raise ScenarioError(f"{where}.grid: {exc}") from exc

    stop_specs = []
    for i, st in enumerate(data.get("stop_times", [])):
        label = st.get("label", f"S{i}")
        kind = _require(st, "kind", f"{where}.stop_times[{i}]")
        params = {k: v for k, v in st.items() if k not in ("label", "kind")}
        stop_specs.append(StopTimeSpec(label=label, kind=kind, params=params))
    labels = [s.label for s in stop_specs]
    if len(set(labels)) != len(labels):
        raise ScenarioError(f"{where}: duplicate stop-time labels {labels}")

    raw_cocycles = data.get("cocycles", [])
    if "cocycle" in data:
        raw_cocycles = [data["cocycle"]] + list(raw_cocycles)
    cocycle_specs = []
    for i, cs in enumerate(raw_cocycles):
        label = cs.get("label", f"V{i}")
        cocycle_specs.append(
            CocycleSpec(
                label=label,
                adaptedness=cs.get("adaptedness", "identity"),
                generator=cs.get("generator", "haar"),
                params={
                    k: v
                    for k, v in cs.items()
                    if k not in ("label", "adaptedness", "generator")
                },
            )
        )

    checks = data.get("checks", {})
    names = tuple(checks.get("names", ["default"]))
    tolerance = float(checks.get("tolerance", 1e-9))

    converge = None
    if "converge" in data:
        cv = data["converge"]
        converge = ConvergeSpec(
            target=_require(cv, "target", f"{where}.converge"),
            cocycle=_require(cv, "cocycle", f"{where}.converge"),
            levels=int(cv.get("levels", 3)),
            modulus_continuity=bool(cv.get("modulus_continuity", True)),
        )

    sweep = None
    if "sweep" in data:
        sw = data["sweep"]
        pairs = tuple(
            (pair["f"], pair["g"]) for pair in sw.get("pairs", [])
        )
        sweep = SweepSpec(caps=tuple(int(c) for c in _require(sw, "caps", f"{where}.sweep")),
                          pairs=pairs)

    return Scenario(
        name=data.get("name", path.stem if path else "scenario"),
        seed=int(data.get("seed", 0)),
        instances=int(data.get("instances", 1)),
        cfg=cfg,
        stop_times=tuple(stop_specs),
        cocycles=tuple(cocycle_specs),
        check_names=names,
        tolerance=tolerance,
        converge=converge,
        sweep=sweep,
        path=path,
    )
