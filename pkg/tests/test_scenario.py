"""Scenario documents: schema, validation diagnostics, and hashing."""

import json
from importlib import resources

import pytest
import yaml

from ucspd.errors import ScenarioError
from ucspd.scenario import load_scenario, parse_scenario, scenario_with_seed

BUNDLED = resources.files("ucspd") / "scenarios"


def bundled_text(name="l2_300mw"):
    return (BUNDLED / f"{name}.scenario").read_text(encoding="utf-8")


class TestParseBundled:
    def test_reference_scenario_parses(self):
        s = parse_scenario(bundled_text())
        assert s.name == "l2_300mw"
        assert s.crystal.length_mm == 2.0
        assert s.crystal.gate_width_fs == pytest.approx(408.6)
        assert s.pump_fwhm_fs == 200.0
        assert s.signal_fwhm_fs == 240.0
        assert s.mean_photons_per_pulse == 0.1
        assert s.rep_rate_hz == 76.3e6

    def test_calibration_anchors_reproduce(self):
        s = parse_scenario(bundled_text())
        # the pump and noise models pass exactly through their anchors
        assert s.internal_eta_at(300.0) == pytest.approx(0.101, rel=1e-12)
        assert s.noise_cps_at(300.0) == pytest.approx(800.0, rel=1e-12)
        assert s.external_eta_at() == pytest.approx(0.101 * 0.41 * 0.85 * 0.94, rel=1e-12)

    @pytest.mark.parametrize("name", ["l1_300mw", "l2_300mw", "l3_300mw"])
    def test_all_bundled_scenarios_parse(self, name):
        s = parse_scenario(bundled_text(name))
        assert s.name == name
        assert len(s.scenario_hash) == 12
        int(s.scenario_hash, 16)

    def test_load_scenario_reads_files(self, tmp_path):
        path = tmp_path / "copy.scenario"
        path.write_text(bundled_text(), encoding="utf-8")
        assert load_scenario(path).scenario_hash == parse_scenario(bundled_text()).scenario_hash

    def test_load_scenario_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError):
            load_scenario(tmp_path / "nope.scenario")


class TestHash:
    def test_echo_round_trip_preserves_hash(self):
        s = parse_scenario(bundled_text())
        doc = s.effective()
        doc["output_dir"] = s.output_dir
        again = parse_scenario(yaml.safe_dump(doc))
        assert again.scenario_hash == s.scenario_hash
        assert again.effective_json == s.effective_json

    def test_output_dir_does_not_affect_hash(self):
        a = parse_scenario(bundled_text())
        b = parse_scenario(bundled_text().replace("output_dir: out", "output_dir: elsewhere"))
        assert b.output_dir == "elsewhere"
        assert b.scenario_hash == a.scenario_hash

    def test_seed_affects_hash(self):
        a = parse_scenario(bundled_text())
        b = scenario_with_seed(a, a.seed + 1)
        assert b.scenario_hash != a.scenario_hash
        assert json.loads(b.effective_json)["seed"] == a.seed + 1

    def test_any_physics_key_affects_hash(self):
        a = parse_scenario(bundled_text())
        b = parse_scenario(bundled_text().replace("length_mm: 2.0", "length_mm: 2.5"))
        assert b.scenario_hash != a.scenario_hash

    def test_seed_override_rejects_bad_values(self):
        s = parse_scenario(bundled_text())
        with pytest.raises(ScenarioError):
            scenario_with_seed(s, -1)
        with pytest.raises(ScenarioError):
            scenario_with_seed(s, 2 ** 64)


class TestDiagnostics:
    def test_empty_document_lists_required_keys(self):
        with pytest.raises(ScenarioError) as err:
            parse_scenario("")
        for key in ("name", "seed", "detector", "source", "experiment"):
            assert key in str(err.value)

    def test_missing_section_names_it(self):
        with pytest.raises(ScenarioError, match="detector"):
            parse_scenario("name: x\nseed: 1\n")

    def test_unknown_key_names_path(self):
        text = bundled_text().replace("dt_fs: 1.0", "dt_fs: 1.0\n  extra_knob: 3")
        with pytest.raises(ScenarioError, match=r"experiment.*extra_knob"):
            parse_scenario(text)

    def test_negative_crystal_length_cites_invariant(self):
        text = bundled_text().replace("length_mm: 2.0", "length_mm: -2.0")
        with pytest.raises(ScenarioError, match=r"detector\.crystal.*positive"):
            parse_scenario(text)

    def test_type_mismatch_names_path(self):
        text = bundled_text().replace("step_fs: 25.0", "step_fs: wide")
        with pytest.raises(ScenarioError, match=r"experiment\.scan\.step_fs"):
            parse_scenario(text)

    def test_bool_is_not_a_number(self):
        text = bundled_text().replace("dwell_s: 1.0\n    signal", "dwell_s: true\n    signal")
        with pytest.raises(ScenarioError, match="dwell_s"):
            parse_scenario(text)

    def test_not_yaml_at_all(self):
        with pytest.raises(ScenarioError, match="YAML"):
            parse_scenario("{unbalanced")

    def test_scalar_document_rejected(self):
        with pytest.raises(ScenarioError):
            parse_scenario("42")

    @pytest.mark.parametrize("old,new,path", [
        ("seed: 20260815", "seed: -5", "seed"),
        ("start_fs: -1800.0", "start_fs: 1800.0", "scan"),
        ("n_points: 24", "n_points: 3", "sweep"),
        ("contrast: 0.982", "contrast: 0.0", "contrast"),
        ("power_stop_mw: 500.0", "power_stop_mw: 10.0", "power"),
        ("signal: timebin", "signal: chirped", "signal"),
        ("calibration_noise_cps: 800.0", "calibration_noise_cps: 10.0", "noise"),
    ])
    def test_section_invariants_enforced(self, old, new, path):
        text = bundled_text().replace(old, new)
        assert text != bundled_text()
        with pytest.raises(ScenarioError, match=path):
            parse_scenario(text)


class TestSections:
    def test_power_grid_includes_both_ends(self):
        s = parse_scenario(bundled_text())
        powers = s.limits.powers_mw()
        assert powers[0] == 50.0
        assert powers[-1] == 500.0
        assert len(powers) == 19

    def test_defaults_fill_in(self):
        text = """
name: tiny
seed: 7
detector:
  crystal: {length_mm: 1.5}
  pump: {p_sat_mw: 200.0, calibration_power_mw: 300.0, calibration_eta: 0.1}
  noise: {dark_cps: 100.0, growth_per_unit_eta: 40.0, calibration_eta: 0.1,
          calibration_noise_cps: 900.0}
source:
  pump_fwhm_fs: 200.0
  signal_fwhm_fs: 240.0
  pump_power_mw: 300.0
experiment:
  scan: {start_fs: -600.0, stop_fs: 600.0, step_fs: 20.0}
  sweep: {counts_scale: 1000000.0}
  timebin: {slot_spacing_fs: 700.0}
  limits: {power_start_mw: 100.0, power_stop_mw: 400.0, power_step_mw: 50.0}
"""
        s = parse_scenario(text)
        assert s.output_dir == "out"
        assert s.crystal.tau_g_fs_per_mm == 204.3
        assert s.apd_efficiency == 0.41
        assert s.mean_photons_per_pulse == 0.1
        assert s.rep_rate_hz == 76.3e6
        assert s.dt_fs == 1.0
        assert s.scan.dwell_s == 1.0
        assert s.scan.signal == "gaussian"
        assert s.sweep.n_points == 24
        assert s.timebin.contrast == 1.0
        assert s.limits.integration_s == 1.0
