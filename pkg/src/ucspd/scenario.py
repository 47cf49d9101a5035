"""Declarative run configuration: one YAML document drives every subcommand.

A scenario file is the reproducibility contract: it pins the detector
(crystal, efficiency chain, pump saturation, noise model), the source
(pulse widths, photon flux), the experiment parameters for each subcommand,
and the random seed.  Parsing is strict: every key is checked for type and
range against the owning module's invariants before anything runs, and
unknown keys are errors that name the offending path.

The scenario hash is the first 12 hex characters of the SHA-256 of the
effective configuration (defaults filled in, sorted keys, compact JSON).
The output directory is excluded from the hash, because moving artifacts
must not change their identity; the seed is included, because it changes
the counts.  Every artifact file embeds this hash so downstream aggregation
can refuse to mix runs.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace

import yaml

from .detector import (
    EfficiencyChain,
    NoiseModel,
    PumpEfficiencyModel,
    efficiency_at_power,
    external_efficiency,
    noise_cps,
)
from .errors import ScenarioError, ValidationError
from .response import DEFAULT_GROUP_DELAY_FS_PER_MM, CrystalSpec
from .waveform import PulseSpec

__all__ = [
    "ScanSection",
    "SweepSection",
    "TimebinSection",
    "LimitsSection",
    "Scenario",
    "parse_scenario",
    "load_scenario",
    "scenario_with_seed",
]

_TOP_LEVEL_KEYS = ("name", "seed", "detector", "source", "experiment")
_HASH_LENGTH = 12

# sentinel distinct from None so explicit nulls are caught as type errors
_REQUIRED = object()


def _as_mapping(node, path):
    if not isinstance(node, dict):
        raise ScenarioError(f"{path}: expected a mapping, got {type(node).__name__}")
    return dict(node)


def _take(mapping, key, path, default=_REQUIRED):
    if key in mapping:
        return mapping.pop(key)
    if default is _REQUIRED:
        raise ScenarioError(f"{path}: missing required key {key!r}")
    return default


def _no_extras(mapping, path):
    if mapping:
        extra = ", ".join(sorted(map(str, mapping)))
        raise ScenarioError(f"{path}: unknown keys: {extra}")


def _real(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{path}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ScenarioError(f"{path}: must be finite, got {value!r}")
    return value


def _integer(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{path}: expected an integer, got {value!r}")
    return value


def _string(value, path):
    if not isinstance(value, str) or not value:
        raise ScenarioError(f"{path}: expected a non-empty string, got {value!r}")
    return value


def _boolean(value, path):
    if not isinstance(value, bool):
        raise ScenarioError(f"{path}: expected true or false, got {value!r}")
    return value


def _build(path, factory, *args, **kwargs):
    """Construct a module object, reporting its invariant under the key path."""
    try:
        return factory(*args, **kwargs)
    except ValidationError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class ScanSection:
    """Delay-scan parameters for the ``scan`` and ``deconv`` subcommands."""

    start_fs: float
    stop_fs: float
    step_fs: float
    dwell_s: float
    signal: str

    def __post_init__(self) -> None:
        if self.stop_fs <= self.start_fs:
            raise ScenarioError(
                f"scan stop {self.stop_fs} must exceed start {self.start_fs}"
            )
        if self.step_fs <= 0.0:
            raise ScenarioError(f"scan step must be positive, got {self.step_fs}")
        if self.dwell_s <= 0.0:
            raise ScenarioError(f"scan dwell must be positive, got {self.dwell_s}")
        if self.signal not in ("gaussian", "timebin"):
            raise ScenarioError(
                f"scan signal must be 'gaussian' or 'timebin', got {self.signal!r}"
            )


@dataclass(frozen=True)
class SweepSection:
    """Phase-sweep parameters for the ``sweep`` and ``fitvis`` subcommands."""

    n_points: int
    dwell_s: float
    counts_scale: float
    include_noise: bool

    def __post_init__(self) -> None:
        if self.n_points < 5:
            raise ScenarioError(f"sweep needs at least 5 points, got {self.n_points}")
        if self.dwell_s <= 0.0:
            raise ScenarioError(f"sweep dwell must be positive, got {self.dwell_s}")
        if self.counts_scale <= 0.0:
            raise ScenarioError(
                f"sweep counts scale must be positive, got {self.counts_scale}"
            )


@dataclass(frozen=True)
class TimebinSection:
    """Qubit-state parameters for the ``timebin`` subcommand."""

    slot_spacing_fs: float
    phase_rad: float
    phase_prime_rad: float
    contrast: float

    def __post_init__(self) -> None:
        if self.slot_spacing_fs <= 0.0:
            raise ScenarioError(
                f"slot spacing must be positive, got {self.slot_spacing_fs}"
            )
        if not (0.0 < self.contrast <= 1.0):
            raise ScenarioError(f"contrast must be in (0, 1], got {self.contrast}")


@dataclass(frozen=True)
class LimitsSection:
    """Pump-power sweep for the ``limits`` subcommand."""

    power_start_mw: float
    power_stop_mw: float
    power_step_mw: float
    integration_s: float

    def __post_init__(self) -> None:
        if self.power_start_mw <= 0.0:
            raise ScenarioError(
                f"power sweep start must be positive, got {self.power_start_mw}"
            )
        if self.power_stop_mw <= self.power_start_mw:
            raise ScenarioError(
                f"power sweep stop {self.power_stop_mw} must exceed start "
                f"{self.power_start_mw}"
            )
        if self.power_step_mw <= 0.0:
            raise ScenarioError(
                f"power sweep step must be positive, got {self.power_step_mw}"
            )
        if self.integration_s <= 0.0:
            raise ScenarioError(
                f"integration time must be positive, got {self.integration_s}"
            )

    def powers_mw(self) -> list:
        out = []
        k = 0
        while True:
            p = self.power_start_mw + k * self.power_step_mw
            if p > self.power_stop_mw * (1.0 + 1e-12):
                return out
            out.append(p)
            k += 1


@dataclass(frozen=True)
class Scenario:
    """A fully validated run configuration.

    All detector and source objects are constructed (and therefore
    validated) at parse time; the sections below carry the per-subcommand
    experiment parameters.  ``effective_json`` is the canonical serialized
    form that the scenario hash is computed from.
    """

    name: str
    seed: int
    output_dir: str
    crystal: CrystalSpec
    apd_efficiency: float
    fiber_coupling: float
    filter_transmittance: float
    pump_model: PumpEfficiencyModel
    noise_model: NoiseModel
    pump_fwhm_fs: float
    signal_fwhm_fs: float
    mean_photons_per_pulse: float
    rep_rate_hz: float
    pump_power_mw: float
    dt_fs: float
    scan: ScanSection
    sweep: SweepSection
    timebin: TimebinSection
    limits: LimitsSection
    effective_json: str

    @property
    def scenario_hash(self) -> str:
        digest = hashlib.sha256(self.effective_json.encode("utf-8")).hexdigest()
        return digest[:_HASH_LENGTH]

    @property
    def pump_pulse(self) -> PulseSpec:
        return PulseSpec(fwhm_fs=self.pump_fwhm_fs)

    @property
    def signal_pulse(self) -> PulseSpec:
        return PulseSpec(fwhm_fs=self.signal_fwhm_fs)

    def effective(self) -> dict:
        """The defaults-filled configuration the hash is computed over."""
        return json.loads(self.effective_json)

    def internal_eta_at(self, power_mw: float | None = None) -> float:
        power = self.pump_power_mw if power_mw is None else power_mw
        return efficiency_at_power(self.pump_model, power)

    def chain_at(self, power_mw: float | None = None) -> EfficiencyChain:
        return EfficiencyChain(
            internal_upconversion=self.internal_eta_at(power_mw),
            apd_efficiency=self.apd_efficiency,
            fiber_coupling=self.fiber_coupling,
            filter_transmittance=self.filter_transmittance,
        )

    def external_eta_at(self, power_mw: float | None = None) -> float:
        return external_efficiency(self.chain_at(power_mw))

    def noise_cps_at(self, power_mw: float | None = None) -> float:
        return noise_cps(self.noise_model, self.internal_eta_at(power_mw))


def _canonical_json(effective: dict) -> str:
    return json.dumps(effective, sort_keys=True, separators=(",", ":"))


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document.

    Raises
    ------
    ScenarioError
        Malformed YAML, missing or unknown keys, type mismatches, or any
        module invariant violation; the message names the key path.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"scenario is not valid YAML: {exc}") from exc
    if doc is None or doc == {}:
        raise ScenarioError(
            "scenario is empty; required keys: " + ", ".join(_TOP_LEVEL_KEYS)
        )
    root = _as_mapping(doc, "scenario")

    name = _string(_take(root, "name", "scenario"), "name")
    seed = _integer(_take(root, "seed", "scenario"), "seed")
    if not (0 <= seed < 2 ** 64):
        raise ScenarioError(f"seed: must be in [0, 2^64), got {seed}")
    output_dir = _string(_take(root, "output_dir", "scenario", default="out"), "output_dir")

    detector = _as_mapping(_take(root, "detector", "scenario"), "detector")
    crystal_map = _as_mapping(_take(detector, "crystal", "detector"), "detector.crystal")
    length_mm = _real(_take(crystal_map, "length_mm", "detector.crystal"), "detector.crystal.length_mm")
    tau_g = _real(
        _take(crystal_map, "tau_g_fs_per_mm", "detector.crystal", default=DEFAULT_GROUP_DELAY_FS_PER_MM),
        "detector.crystal.tau_g_fs_per_mm",
    )
    label = _take(crystal_map, "label", "detector.crystal", default="")
    if label:
        label = _string(label, "detector.crystal.label")
    elif label != "":
        raise ScenarioError(f"detector.crystal.label: expected a string, got {label!r}")
    _no_extras(crystal_map, "detector.crystal")
    crystal = _build(
        "detector.crystal", CrystalSpec,
        length_mm=length_mm, tau_g_fs_per_mm=tau_g, label=label,
    )

    chain_map = _as_mapping(
        _take(detector, "chain", "detector", default={}), "detector.chain"
    )
    apd = _real(_take(chain_map, "apd_efficiency", "detector.chain", default=0.41), "detector.chain.apd_efficiency")
    fiber = _real(_take(chain_map, "fiber_coupling", "detector.chain", default=0.85), "detector.chain.fiber_coupling")
    filt = _real(_take(chain_map, "filter_transmittance", "detector.chain", default=0.94), "detector.chain.filter_transmittance")
    _no_extras(chain_map, "detector.chain")

    pump_map = _as_mapping(_take(detector, "pump", "detector"), "detector.pump")
    p_sat = _real(_take(pump_map, "p_sat_mw", "detector.pump"), "detector.pump.p_sat_mw")
    cal_power = _real(_take(pump_map, "calibration_power_mw", "detector.pump"), "detector.pump.calibration_power_mw")
    cal_eta = _real(_take(pump_map, "calibration_eta", "detector.pump"), "detector.pump.calibration_eta")
    _no_extras(pump_map, "detector.pump")
    pump_model = _build(
        "detector.pump", PumpEfficiencyModel.from_calibration, cal_power, cal_eta, p_sat
    )

    noise_map = _as_mapping(_take(detector, "noise", "detector"), "detector.noise")
    dark = _real(_take(noise_map, "dark_cps", "detector.noise"), "detector.noise.dark_cps")
    growth = _real(_take(noise_map, "growth_per_unit_eta", "detector.noise"), "detector.noise.growth_per_unit_eta")
    noise_eta = _real(_take(noise_map, "calibration_eta", "detector.noise"), "detector.noise.calibration_eta")
    noise_ref = _real(_take(noise_map, "calibration_noise_cps", "detector.noise"), "detector.noise.calibration_noise_cps")
    _no_extras(noise_map, "detector.noise")
    noise_model = _build(
        "detector.noise", NoiseModel.from_calibration, dark, growth, noise_eta, noise_ref
    )
    _no_extras(detector, "detector")

    source = _as_mapping(_take(root, "source", "scenario"), "source")
    pump_fwhm = _real(_take(source, "pump_fwhm_fs", "source"), "source.pump_fwhm_fs")
    signal_fwhm = _real(_take(source, "signal_fwhm_fs", "source"), "source.signal_fwhm_fs")
    mu = _real(_take(source, "mean_photons_per_pulse", "source", default=0.1), "source.mean_photons_per_pulse")
    rep_rate = _real(_take(source, "rep_rate_hz", "source", default=76.3e6), "source.rep_rate_hz")
    pump_power = _real(_take(source, "pump_power_mw", "source"), "source.pump_power_mw")
    _no_extras(source, "source")
    _build("source.pump_fwhm_fs", PulseSpec, fwhm_fs=pump_fwhm)
    _build("source.signal_fwhm_fs", PulseSpec, fwhm_fs=signal_fwhm)
    if mu < 0.0:
        raise ScenarioError(f"source.mean_photons_per_pulse: must be >= 0, got {mu}")
    if rep_rate <= 0.0:
        raise ScenarioError(f"source.rep_rate_hz: must be positive, got {rep_rate}")
    if pump_power <= 0.0:
        raise ScenarioError(f"source.pump_power_mw: must be positive, got {pump_power}")

    experiment = _as_mapping(_take(root, "experiment", "scenario"), "experiment")
    dt_fs = _real(_take(experiment, "dt_fs", "experiment", default=1.0), "experiment.dt_fs")
    if dt_fs <= 0.0:
        raise ScenarioError(f"experiment.dt_fs: must be positive, got {dt_fs}")

    scan_map = _as_mapping(_take(experiment, "scan", "experiment"), "experiment.scan")
    scan = _build(
        "experiment.scan", ScanSection,
        start_fs=_real(_take(scan_map, "start_fs", "experiment.scan"), "experiment.scan.start_fs"),
        stop_fs=_real(_take(scan_map, "stop_fs", "experiment.scan"), "experiment.scan.stop_fs"),
        step_fs=_real(_take(scan_map, "step_fs", "experiment.scan"), "experiment.scan.step_fs"),
        dwell_s=_real(_take(scan_map, "dwell_s", "experiment.scan", default=1.0), "experiment.scan.dwell_s"),
        signal=_string(_take(scan_map, "signal", "experiment.scan", default="gaussian"), "experiment.scan.signal"),
    )
    _no_extras(scan_map, "experiment.scan")

    sweep_map = _as_mapping(_take(experiment, "sweep", "experiment"), "experiment.sweep")
    sweep = _build(
        "experiment.sweep", SweepSection,
        n_points=_integer(_take(sweep_map, "n_points", "experiment.sweep", default=24), "experiment.sweep.n_points"),
        dwell_s=_real(_take(sweep_map, "dwell_s", "experiment.sweep", default=1.0), "experiment.sweep.dwell_s"),
        counts_scale=_real(_take(sweep_map, "counts_scale", "experiment.sweep"), "experiment.sweep.counts_scale"),
        include_noise=_boolean(_take(sweep_map, "include_noise", "experiment.sweep", default=False), "experiment.sweep.include_noise"),
    )
    _no_extras(sweep_map, "experiment.sweep")

    timebin_map = _as_mapping(_take(experiment, "timebin", "experiment"), "experiment.timebin")
    timebin = _build(
        "experiment.timebin", TimebinSection,
        slot_spacing_fs=_real(_take(timebin_map, "slot_spacing_fs", "experiment.timebin"), "experiment.timebin.slot_spacing_fs"),
        phase_rad=_real(_take(timebin_map, "phase_rad", "experiment.timebin", default=0.0), "experiment.timebin.phase_rad"),
        phase_prime_rad=_real(_take(timebin_map, "phase_prime_rad", "experiment.timebin", default=0.0), "experiment.timebin.phase_prime_rad"),
        contrast=_real(_take(timebin_map, "contrast", "experiment.timebin", default=1.0), "experiment.timebin.contrast"),
    )
    _no_extras(timebin_map, "experiment.timebin")

    limits_map = _as_mapping(_take(experiment, "limits", "experiment"), "experiment.limits")
    limits = _build(
        "experiment.limits", LimitsSection,
        power_start_mw=_real(_take(limits_map, "power_start_mw", "experiment.limits"), "experiment.limits.power_start_mw"),
        power_stop_mw=_real(_take(limits_map, "power_stop_mw", "experiment.limits"), "experiment.limits.power_stop_mw"),
        power_step_mw=_real(_take(limits_map, "power_step_mw", "experiment.limits"), "experiment.limits.power_step_mw"),
        integration_s=_real(_take(limits_map, "integration_s", "experiment.limits", default=1.0), "experiment.limits.integration_s"),
    )
    _no_extras(limits_map, "experiment.limits")
    _no_extras(experiment, "experiment")
    _no_extras(root, "scenario")

    effective = {
        "name": name,
        "seed": seed,
        "detector": {
            "crystal": {
                "length_mm": length_mm,
                "tau_g_fs_per_mm": tau_g,
                "label": crystal.label,
            },
            "chain": {
                "apd_efficiency": apd,
                "fiber_coupling": fiber,
                "filter_transmittance": filt,
            },
            "pump": {
                "p_sat_mw": p_sat,
                "calibration_power_mw": cal_power,
                "calibration_eta": cal_eta,
            },
            "noise": {
                "dark_cps": dark,
                "growth_per_unit_eta": growth,
                "calibration_eta": noise_eta,
                "calibration_noise_cps": noise_ref,
            },
        },
        "source": {
            "pump_fwhm_fs": pump_fwhm,
            "signal_fwhm_fs": signal_fwhm,
            "mean_photons_per_pulse": mu,
            "rep_rate_hz": rep_rate,
            "pump_power_mw": pump_power,
        },
        "experiment": {
            "dt_fs": dt_fs,
            "scan": {
                "start_fs": scan.start_fs,
                "stop_fs": scan.stop_fs,
                "step_fs": scan.step_fs,
                "dwell_s": scan.dwell_s,
                "signal": scan.signal,
            },
            "sweep": {
                "n_points": sweep.n_points,
                "dwell_s": sweep.dwell_s,
                "counts_scale": sweep.counts_scale,
                "include_noise": sweep.include_noise,
            },
            "timebin": {
                "slot_spacing_fs": timebin.slot_spacing_fs,
                "phase_rad": timebin.phase_rad,
                "phase_prime_rad": timebin.phase_prime_rad,
                "contrast": timebin.contrast,
            },
            "limits": {
                "power_start_mw": limits.power_start_mw,
                "power_stop_mw": limits.power_stop_mw,
                "power_step_mw": limits.power_step_mw,
                "integration_s": limits.integration_s,
            },
        },
    }

    scenario = Scenario(
        name=name,
        seed=seed,
        output_dir=output_dir,
        crystal=crystal,
        apd_efficiency=apd,
        fiber_coupling=fiber,
        filter_transmittance=filt,
        pump_model=pump_model,
        noise_model=noise_model,
        pump_fwhm_fs=pump_fwhm,
        signal_fwhm_fs=signal_fwhm,
        mean_photons_per_pulse=mu,
        rep_rate_hz=rep_rate,
        pump_power_mw=pump_power,
        dt_fs=dt_fs,
        scan=scan,
        sweep=sweep,
        timebin=timebin,
        limits=limits,
        effective_json=_canonical_json(effective),
    )
    # fail fast on the composed detector operating point as well
    _build("detector", scenario.chain_at)
    _build("detector", scenario.noise_cps_at)
    return scenario


def load_scenario(path) -> Scenario:
    """Read and parse a scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path!r}: {exc}") from exc
    return parse_scenario(text)


def scenario_with_seed(scenario: Scenario, seed: int) -> Scenario:
    """A copy with a different seed (and therefore a different hash)."""
    if not isinstance(seed, int) or not (0 <= seed < 2 ** 64):
        raise ScenarioError(f"seed must be an integer in [0, 2^64), got {seed!r}")
    effective = scenario.effective()
    effective["seed"] = seed
    return replace(scenario, seed=seed, effective_json=_canonical_json(effective))
