import json
import math
from pathlib import Path

import pytest
import yaml

from conftest import set_noise_scale, standard_config
from linewatch.cli import main
from linewatch.errors import ConfigurationError
from linewatch.scenario import load_scenario, run_scenario, scenario_from_dict, sweep

GOLDEN = Path(__file__).parent / "golden" / "standard_leak_report.json"


class TestParsing:
    def test_standard_config_parses(self):
        s = scenario_from_dict(standard_config())
        assert s.pipeline.length == 10000.0
        assert len(s.instruments) == 6
        assert s.rtm is not None and s.balance is not None and s.acoustic is not None

    def test_missing_required_field_names_path(self):
        cfg = standard_config()
        del cfg["fluid"]
        with pytest.raises(ConfigurationError, match="fluid"):
            scenario_from_dict(cfg)

    def test_bad_boundary_kind_names_path(self):
        cfg = standard_config()
        cfg["boundaries"]["inlet"]["kind"] = "head"
        with pytest.raises(ConfigurationError, match="boundaries.inlet"):
            scenario_from_dict(cfg)

    def test_leak_outside_line_names_path(self):
        cfg = standard_config()
        cfg["leaks"] = [{"position": 20000.0, "start_time": 10.0, "mass_rate": 1.0}]
        with pytest.raises(ConfigurationError, match=r"leaks\[0\]"):
            scenario_from_dict(cfg)

    def test_leak_must_start_after_zero(self):
        cfg = standard_config()
        cfg["leaks"] = [{"position": 5000.0, "start_time": 0.0, "mass_rate": 1.0}]
        with pytest.raises(ConfigurationError, match="start_time"):
            scenario_from_dict(cfg)

    def test_poll_must_be_multiple_of_dt(self):
        cfg = standard_config()
        cfg["solver"]["dt"] = 3.0
        with pytest.raises(ConfigurationError, match="multiple"):
            scenario_from_dict(cfg)

    def test_balance_model_mode_needs_rtm(self):
        cfg = standard_config()
        cfg["rtm"] = {"enabled": False}
        with pytest.raises(ConfigurationError, match="shadow"):
            scenario_from_dict(cfg)

    def test_unit_conversion(self):
        cfg = standard_config()
        cfg["units"] = {"pressure": "bar", "length": "km", "temperature": "degC"}
        cfg["pipeline"]["length"] = 10.0
        cfg["boundaries"]["inlet"]["value"] = 10.0
        cfg["boundaries"]["outlet"]["value"] = 6.7
        cfg["boundaries"]["temperature"]["value"] = 26.85
        cfg["fluid"]["P0"] = 1.0
        cfg["fluid"]["T0"] = 26.85
        cfg["pipeline"]["ground_temperature"] = 15.0
        for inst in cfg["instruments"]:
            inst["position"] /= 1000.0
        cfg["leaks"][0]["position"] = 5.0
        cfg["rtm"]["pressure_threshold"] = 0.025
        cfg["acoustic"]["initial_amplitude"] = 0.5
        for sens in cfg["acoustic"]["sensors"]:
            sens["position"] /= 1000.0
            sens["threshold"] = 0.05
        cfg["solver"]["target_dx"] = 0.1
        s = scenario_from_dict(cfg)
        assert s.pipeline.length == 10000.0
        assert s.bc.inlet.series.at(0.0) == pytest.approx(1.0e6)
        assert s.bc.temperature.at(0.0) == pytest.approx(300.0)
        assert s.fluid.eos.T0 == pytest.approx(300.0)
        assert s.leaks[0].position == 5000.0
        assert s.rtm["policy"].pressure_threshold == pytest.approx(2500.0)

    def test_gas_fluid_section(self):
        cfg = standard_config()
        cfg["fluid"] = {
            "kind": "gas", "R": 500.0, "y": 1.0,
            "z_reference": {"P": 5.0e6, "T": 300.0, "Z": 0.9},
            "specific_heat": 2200.0, "sound_speed": 380.0,
        }
        cfg["boundaries"]["inlet"]["value"] = 6.0e6
        cfg["boundaries"]["outlet"]["value"] = 5.0e6
        s = scenario_from_dict(cfg)
        assert s.fluid.is_gas and s.fluid.eos.k > 0


class TestRunning:
    def test_no_leak_run_all_detectors_silent(self):
        cfg = standard_config(horizon=420.0)
        cfg["leaks"] = []
        report = run_scenario(scenario_from_dict(cfg))
        assert not report.rtm["declared"]
        assert report.balance["first_alarm_time"] is None
        assert report.acoustic["detections"] == []
        assert report.metrics == {}
        assert report.truth["leaks"] == []

    def test_identical_seed_byte_identical_reports(self):
        a = run_scenario(scenario_from_dict(standard_config(horizon=420.0)))
        b = run_scenario(scenario_from_dict(standard_config(horizon=420.0)))
        assert a.to_json() == b.to_json()

    def test_standard_leak_detected_with_truth_metrics(self):
        report = run_scenario(scenario_from_dict(standard_config()))
        assert report.rtm["declared"]
        assert 0 < report.metrics["rtm_detection_latency"] <= 600.0
        assert report.metrics["acoustic_detection_latency"] == pytest.approx(
            5000.0 / 1414.2, abs=0.02)
        assert report.mass_ledger["max_step_residual_relative"] < 1e-8

    def test_ground_truth_echoed_verbatim(self):
        report = run_scenario(scenario_from_dict(standard_config()))
        assert report.truth["leaks"][0] == {
            "position": 5000.0, "start_time": 120.0, "mass_rate": 0.70}

    def test_golden_report_schema_stable(self):
        cfg = standard_config(horizon=420.0, seed=2025)
        report = run_scenario(scenario_from_dict(cfg)).to_dict()
        report["config_sha256"] = "pinned"
        golden = json.loads(GOLDEN.read_text())
        _assert_same_structure("report", golden, report)

    def test_availability_section_in_report(self):
        cfg = standard_config(horizon=60.0)
        cfg["leaks"] = []
        cfg["availability"] = {"per_unit": 0.99}
        report = run_scenario(scenario_from_dict(cfg))
        rows = {r["name"]: r for r in report.availability}
        assert rows["mass_flow"]["product"] == pytest.approx(0.99**11, abs=1e-12)
        assert rows["acoustic"]["rank"] == 1


def _assert_same_structure(path, expected, actual):
    if isinstance(expected, bool) or isinstance(actual, bool):
        assert expected == actual, path
        return
    if isinstance(expected, float) and isinstance(actual, float):
        assert actual == pytest.approx(expected, rel=1e-9, abs=1e-12), path
        return
    assert type(expected) is type(actual), f"{path}: {type(expected)} vs {type(actual)}"
    if isinstance(expected, dict):
        assert sorted(expected) == sorted(actual), f"{path}: key set changed"
        for k in expected:
            _assert_same_structure(f"{path}.{k}", expected[k], actual[k])
    elif isinstance(expected, list):
        assert len(expected) == len(actual), f"{path}: length changed"
        for i, (e, a) in enumerate(zip(expected, actual)):
            _assert_same_structure(f"{path}[{i}]", e, a)
    elif isinstance(expected, float):
        assert actual == pytest.approx(expected, rel=1e-9, abs=1e-12), path
    else:
        assert expected == actual, path


class TestSweep:
    def test_empty_grid_is_template_run(self):
        cfg = standard_config(horizon=420.0)
        rows = sweep(cfg, {})
        assert len(rows) == 1 and rows[0]["error"] is None

    def test_leak_size_grid(self):
        cfg = standard_config(horizon=480.0)
        set_noise_scale(cfg, 0.0)
        rows = sweep(cfg, {"leaks.0.mass_rate": [1.4, 3.5]})
        assert [r["leaks.0.mass_rate"] for r in rows] == [1.4, 3.5]
        lat = [r.get("metric_rtm_detection_latency") for r in rows]
        assert all(l is not None for l in lat)
        assert lat[0] >= lat[1]  # bigger leak found no later

    def test_cell_failure_recorded_not_fatal(self):
        cfg = standard_config(horizon=420.0)
        rows = sweep(cfg, {"leaks.0.position": [5000.0, 99999.0]})
        assert rows[0]["error"] is None
        assert "ConfigurationError" in rows[1]["error"]

    def test_leak_size_sweep_latency_monotone(self):
        # 0.5% / 1% / 2% / 5% of rated flow at zero noise; an undetected
        # leak counts as infinite time-to-alarm
        cfg = standard_config(horizon=480.0)
        set_noise_scale(cfg, 0.0)
        sizes = [0.005 * 70.0, 0.01 * 70.0, 0.02 * 70.0, 0.05 * 70.0]
        rows = sweep(cfg, {"leaks.0.mass_rate": sizes})
        latencies = [
            row.get("metric_rtm_detection_latency")
            if row.get("metric_rtm_detection_latency") is not None else math.inf
            for row in rows
        ]
        assert all(a >= b for a, b in zip(latencies, latencies[1:]))
        assert math.isinf(latencies[0])   # 0.5% sits below the scenario thresholds
        assert latencies[-1] < latencies[1]


class TestCli:
    def write_cfg(self, tmp_path, cfg):
        path = tmp_path / "scenario.yaml"
        path.write_text(yaml.safe_dump(cfg))
        return path

    def test_validate_ok(self, tmp_path, capsys):
        path = self.write_cfg(tmp_path, standard_config())
        assert main(["validate", str(path)]) == 0
        assert "OK" in capsys.readouterr().out

    def test_validate_rejects_bad_config(self, tmp_path, capsys):
        cfg = standard_config()
        cfg["pipeline"]["diameter"] = -1.0
        path = self.write_cfg(tmp_path, cfg)
        assert main(["validate", str(path)]) == 2
        assert "configuration error" in capsys.readouterr().err

    def test_run_writes_outputs(self, tmp_path):
        cfg = standard_config(horizon=420.0)
        path = self.write_cfg(tmp_path, cfg)
        out = tmp_path / "out"
        assert main(["run", str(path), "-o", str(out)]) == 0
        for name in ("report.json", "telemetry.csv", "rtm_trace.csv",
                     "balance_windows.csv", "acoustic_events.csv"):
            assert (out / name).exists(), name
        report = json.loads((out / "report.json").read_text())
        assert report["scenario"] == "standard-leak"
        first = (out / "telemetry.csv").read_text().splitlines()[0]
        assert report["config_sha256"] in first  # provenance hash on outputs

    def test_run_dump_states(self, tmp_path):
        cfg = standard_config(horizon=60.0)
        cfg["leaks"] = []
        cfg["output"] = {"state_stride": 12}
        path = self.write_cfg(tmp_path, cfg)
        out = tmp_path / "out"
        assert main(["run", str(path), "-o", str(out), "--dump-states"]) == 0
        lines = (out / "states.dat").read_text().splitlines()
        assert lines[1].split() == ["t", "x", "P", "V", "T", "rho"]
        assert len(lines) > 10

    def test_sweep_command(self, tmp_path):
        cfg = standard_config(horizon=420.0)
        path = self.write_cfg(tmp_path, cfg)
        grid = tmp_path / "grid.yaml"
        grid.write_text(yaml.safe_dump({"seed": [1, 2]}))
        out = tmp_path / "out"
        assert main(["sweep", str(path), "--grid", str(grid), "-o", str(out)]) == 0
        rows = (out / "sweep.csv").read_text().splitlines()
        assert len(rows) == 4  # note + header + 2 cells


class TestSpecInvariantsEndToEnd:
    def test_zero_noise_no_leak_run_marks_nothing_suspect(self):
        cfg = standard_config(horizon=300.0)
        set_noise_scale(cfg, 0.0)
        cfg["leaks"] = []
        cfg["telemetry"]["plausibility"] = {
            "pressure": {"min": 0.0, "max": 5.0e6, "max_rate": 1.0e5},
            "flow": {"min": -150.0, "max": 150.0, "max_rate": 50.0},
            "temperature": {"min": 200.0, "max": 400.0},
        }
        report = run_scenario(scenario_from_dict(cfg))
        for frame in report.frames:
            for r in frame.readings:
                assert r.quality == "good", (frame.poll_time, r)

    def test_near_critical_gas_rejected_at_load(self):
        cfg = standard_config()
        cfg["fluid"] = {
            "kind": "gas", "R": 500.0, "z_mode": "ideal",
            "critical_pressure": 1.0e6, "critical_temperature": 305.0,
            "specific_heat": 2200.0, "sound_speed": 380.0,
        }
        with pytest.raises(ConfigurationError, match="critical"):
            scenario_from_dict(cfg)

    def test_balance_never_reports_location(self):
        report = run_scenario(scenario_from_dict(standard_config()))
        for w in report.balance["windows"]:
            assert "location" not in w

    def test_rtm_beats_balance_on_the_standard_leak(self):
        report = run_scenario(scenario_from_dict(standard_config()))
        assert report.balance["first_alarm_time"] is not None
        assert report.rtm["declared_time"] <= report.balance["first_alarm_time"]


class TestPartialFailure:
    def test_mid_run_solver_failure_yields_partial_report(self):
        cfg = standard_config(horizon=600.0)
        cfg["leaks"] = []
        # operator drives the outlet below vacuum at t ~ 200 s
        cfg["boundaries"]["outlet"] = {
            "kind": "pressure", "series": [[0.0, 6.7e5], [180.0, 6.7e5], [220.0, -5.0e4]],
        }
        report = run_scenario(scenario_from_dict(cfg))
        assert report.run["solver_failure"] is not None
        assert "node" in report.run["solver_failure"]
        assert 0 < report.run["polls"] < 600.0 / 5.0 + 1  # stopped early, kept what it had
        assert not report.rtm["declared"]

    def test_cli_exit_code_on_solver_failure(self, tmp_path):
        cfg = standard_config(horizon=600.0)
        cfg["leaks"] = []
        cfg["boundaries"]["outlet"] = {
            "kind": "pressure", "series": [[0.0, 6.7e5], [180.0, 6.7e5], [220.0, -5.0e4]],
        }
        path = tmp_path / "bad.yaml"
        path.write_text(yaml.safe_dump(cfg))
        assert main(["run", str(path), "-o", str(tmp_path / "out")]) == 1


class TestSimpleBalanceStandalone:
    def test_simple_mode_runs_without_rtm(self):
        cfg = standard_config(horizon=900.0)
        set_noise_scale(cfg, 0.0)
        cfg["rtm"] = {"enabled": False}
        cfg["balance"] = {"window": 600.0, "threshold": 150.0, "mode": "simple"}
        cfg["leaks"] = [{"position": 5000.0, "start_time": 60.0, "mass_rate": 1.0}]
        report = run_scenario(scenario_from_dict(cfg))
        assert not report.rtm["enabled"]
        # simple mode assumes steady inventory: the leak shows as pure meter loss
        w = report.balance["windows"][0]
        assert w["delta_inventory"] == 0.0
        assert w["imbalance"] == pytest.approx(1.0 * 540.0, rel=0.08)
        assert report.balance["first_alarm_time"] is not None

    def test_report_carries_indicator_trace(self):
        report = run_scenario(scenario_from_dict(standard_config(horizon=300.0)))
        trace = report.rtm["indicator_trace"]
        assert len(trace) == report.rtm["polls"]
        warm = [e for e in trace if e["normalized"].get("flow_in") is not None]
        assert warm, "smoothed indicators never warmed up"
