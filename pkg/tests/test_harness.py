"""Scenario loading, the check runner, CLI behaviour and report determinism."""

import math
from pathlib import Path

import numpy as np
import pytest

from qstop.cli import main
from qstop.errors import ScenarioError
from qstop.harness import (
    converge_csv,
    dyadic_boundaries,
    materialize_instances,
    report_csv,
    run_converge,
    run_truncation_sweep,
    run_verify,
    sweep_csv,
)
from qstop.scenario import load_scenario, parse_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def scenario_dict(**overrides):
    base = {
        "name": "inline",
        "seed": 99,
        "instances": 1,
        "grid": {"n_slots": 4, "dt": 0.25, "d": 1, "cap": 1, "k_ini": 2},
        "stop_times": [
            {"label": "S", "kind": "random", "times": [1, 2]},
            {"label": "T", "kind": "deterministic", "t": 1},
        ],
        "cocycles": [
            {"label": "U", "adaptedness": "identity", "generator": "haar"},
            {"label": "K", "adaptedness": "vacuum", "generator": "haar"},
        ],
        "checks": {"names": ["default"], "tolerance": 1e-9},
    }
    base.update(overrides)
    return base


class TestScenarioParsing:
    def test_bundled_files_load(self):
        for name in ("deterministic", "main-theorem", "nightly-multichannel",
                      "converge", "sweep"):
            scenario = load_scenario(SCENARIOS / f"{name}.toml")
            assert scenario.name == name

    def test_missing_grid(self):
        with pytest.raises(ScenarioError, match="grid"):
            parse_scenario({"stop_times": []})

    def test_unknown_check(self):
        scenario = parse_scenario(
            scenario_dict(checks={"names": ["no-such-check"], "tolerance": 1e-9})
        )
        with pytest.raises(Exception, match="unknown check"):
            run_verify(scenario)

    def test_explicit_atom_at_zero_is_input_error(self):
        eye = np.eye(16)
        pairs = [[float(x.real), 0.0] for x in eye.reshape(-1)]
        data = scenario_dict(
            stop_times=[
                {"label": "S", "kind": "explicit", "atoms": [{"t": 0, "matrix": pairs}]}
            ]
        )
        scenario = parse_scenario(data)
        with pytest.raises(ScenarioError, match=r"S\(\{0\}\) = 0"):
            materialize_instances(scenario)

    def test_grid_error_reported(self):
        data = scenario_dict(grid={"n_slots": 20, "dt": 0.1, "d": 1, "cap": 1})
        with pytest.raises(ScenarioError, match="exceeds"):
            parse_scenario(data)


class TestVerifyRunner:
    def test_inline_scenario_passes(self):
        report = run_verify(parse_scenario(scenario_dict()))
        assert report.passed
        assert len(report.results) == len({r.name for r in report.results})

    def test_deterministic_scenario_tight_tolerance(self):
        report = run_verify(load_scenario(SCENARIOS / "deterministic.toml"))
        assert report.passed
        assert all(r.max_entry <= 1e-12 for r in report.results)

    def test_main_theorem_scenario(self):
        report = run_verify(load_scenario(SCENARIOS / "main-theorem.toml"))
        assert report.passed
        assert all(r.max_entry <= 1e-9 for r in report.results)

    def test_every_check_has_an_anchor(self):
        report = run_verify(parse_scenario(scenario_dict()))
        anchors = [r.anchor for r in report.results]
        assert all(anchors)
        assert len(set(anchors)) == len(anchors)

    def test_csv_deterministic_across_runs(self):
        scenario = load_scenario(SCENARIOS / "main-theorem.toml")
        first = report_csv(run_verify(scenario))
        second = report_csv(run_verify(scenario))
        assert first.encode() == second.encode()

    def test_seed_changes_draws(self):
        import dataclasses

        scenario = parse_scenario(scenario_dict())
        other = dataclasses.replace(scenario, seed=scenario.seed + 1)
        s1 = materialize_instances(scenario)[0].stop_times["S"]
        s2 = materialize_instances(other)[0].stop_times["S"]
        assert not np.allclose(s1.atom(1), s2.atom(1))


class TestConverge:
    def test_dyadic_boundaries_nested(self):
        for n in (4, 6, 8):
            prev = None
            for level in (1, 2, 3):
                bounds = dyadic_boundaries(n, level)
                assert bounds[-1] == n
                if prev is not None:
                    assert set(prev) <= set(bounds)
                prev = bounds

    def test_bundled_converge_monotone(self):
        scenario = load_scenario(SCENARIOS / "converge.toml")
        table = run_converge(scenario)
        assert table.monotone
        gaps = [r.max_gap for r in table.rows]
        devs = [r.max_cocycle_dev for r in table.rows]
        assert gaps[-1] <= 1e-9  # grid-resolved target
        assert devs[-1] <= 1e-9
        assert gaps[0] >= gaps[1] >= gaps[2]

    def test_identity_cocycle_column_is_zero(self):
        data = scenario_dict(
            grid={"n_slots": 4, "dt": 0.25, "d": 1, "cap": 1, "k_ini": 2},
            stop_times=[{"label": "F", "kind": "first_arrival", "horizon": 4}],
            cocycles=[{
                "label": "U", "adaptedness": "identity", "generator": "explicit",
                "matrix": [[1.0, 0.0] if i % 5 == 0 else [0.0, 0.0]
                           for i in range(16)],  # 4x4 identity as [re, im] pairs
            }],
            converge={"target": "F", "cocycle": "U", "levels": 2,
                       "modulus_continuity": False},
        )
        table = run_converge(parse_scenario(data))
        assert all(r.max_cocycle_dev <= 1e-12 for r in table.rows)

    def test_levels_guard(self):
        scenario = load_scenario(SCENARIOS / "converge.toml")
        with pytest.raises(ScenarioError, match="levels"):
            run_converge(scenario, levels=1)

    def test_modulus_continuity_guard(self):
        data = scenario_dict(
            stop_times=[{"label": "F", "kind": "first_arrival", "horizon": 4}],
            converge={"target": "F", "cocycle": "U", "levels": 2},
        )
        with pytest.raises(ScenarioError, match="smooth"):
            run_converge(parse_scenario(data))


class TestSweep:
    def test_zero_functions_have_zero_error(self):
        data = scenario_dict(
            sweep={
                "caps": [1, 2],
                "pairs": [{"f": [[[0.0, 0.0]]] * 4, "g": [[[0.0, 0.0]]] * 4}],
            }
        )
        table = run_truncation_sweep(parse_scenario(data))
        assert all(r.error == 0.0 for r in table.rows)

    def test_bundled_sweep_taylor_remainders(self):
        scenario = load_scenario(SCENARIOS / "sweep.toml")
        table = run_truncation_sweep(scenario)
        assert table.monotone
        by_cap = {r.cap: r.error for r in table.rows if r.pair == 0}
        # pair 0 has <f, g> = 0.1 concentrated in one slot, so the cap-k
        # error is the Taylor remainder of exp at 0.1
        for cap in (1, 2, 3, 4):
            remainder = math.exp(0.1) - sum(0.1**k / math.factorial(k)
                                            for k in range(cap + 1))
            assert by_cap[cap] == pytest.approx(remainder, rel=1e-9)

    def test_two_channel_product_oracle(self):
        data = scenario_dict(
            grid={"n_slots": 1, "dt": 0.2, "d": 2, "cap": 1, "k_ini": 1},
            sweep={
                "caps": [1, 2, 3],
                "pairs": [{
                    "f": [[[0.6, 0.0], [0.3, 0.0]]],
                    "g": [[[0.5, 0.0], [0.4, 0.0]]],
                }],
            },
        )
        table = run_truncation_sweep(parse_scenario(data))
        assert table.monotone
        # independent per-channel oracle: the slot series is the cap-bounded
        # sum over joint occupations of prod_c x_c^{a_c} / a_c!
        x = (0.6 * 0.5 + 0.3 * 0.4) * 0.2
        x1, x2 = 0.6 * 0.5 * 0.2, 0.3 * 0.4 * 0.2
        for row in table.rows:
            series = sum(
                (x1**a) * (x2**b) / (math.factorial(a) * math.factorial(b))
                for a in range(row.cap + 1)
                for b in range(row.cap + 1)
                if a + b <= row.cap
            )
            assert row.error == pytest.approx(abs(series - math.exp(x)), rel=1e-9)

    def test_caps_must_increase(self):
        scenario = load_scenario(SCENARIOS / "sweep.toml")
        with pytest.raises(ScenarioError, match="increasing"):
            run_truncation_sweep(scenario, caps=[2, 1])


class TestCli:
    def test_verify_exit_zero(self, tmp_path):
        code = main([
            "verify", str(SCENARIOS / "deterministic.toml"), "--out", str(tmp_path)
        ])
        assert code == 0
        assert (tmp_path / "deterministic.report.csv").exists()
        assert (tmp_path / "deterministic.report.txt").exists()

    def test_verify_csv_bytes_stable(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["verify", str(SCENARIOS / "main-theorem.toml"),
                     "--out", str(out1)]) == 0
        assert main(["verify", str(SCENARIOS / "main-theorem.toml"),
                     "--out", str(out2)]) == 0
        assert (out1 / "main-theorem.report.csv").read_bytes() == \
            (out2 / "main-theorem.report.csv").read_bytes()

    def test_missing_scenario_is_input_error(self, tmp_path):
        assert main(["verify", str(tmp_path / "nope.toml")]) == 2

    def test_corrupted_scenario_names_zero_atom_rule(self, tmp_path, capsys):
        eye16 = np.eye(16)
        rows = ", ".join(
            f"[{v:.1f}, 0.0]" for v in eye16.reshape(-1).real
        )
        bad = tmp_path / "bad.toml"
        bad.write_text(
            "name = \"bad\"\nseed = 1\n"
            "[grid]\nn_slots = 4\ndt = 0.25\nd = 1\ncap = 1\nk_ini = 2\n"
            "[[stop_times]]\nlabel = \"S\"\nkind = \"explicit\"\n"
            "[[stop_times.atoms]]\nt = 0\n"
            f"matrix = [{rows}]\n"
        )
        assert main(["verify", str(bad)]) == 2
        assert "S({0}) = 0" in capsys.readouterr().err

    def test_converge_cli(self, tmp_path):
        code = main([
            "converge", str(SCENARIOS / "converge.toml"),
            "--out", str(tmp_path), "--format", "csv",
        ])
        assert code == 0
        body = (tmp_path / "converge.converge.report.csv").read_text()
        assert body.splitlines()[0] == "level,boundaries,max_gap,max_cocycle_deviation"

    def test_sweep_cli(self, tmp_path):
        code = main([
            "sweep", str(SCENARIOS / "sweep.toml"), "--out", str(tmp_path),
            "--caps", "1,2,3",
        ])
        assert code == 0

    def test_tol_override_can_fail_checks(self, tmp_path):
        # an impossible tolerance forces exit code 1 without any input error
        code = main([
            "verify", str(SCENARIOS / "main-theorem.toml"),
            "--out", str(tmp_path), "--tol", "1e-18",
        ])
        assert code == 1
