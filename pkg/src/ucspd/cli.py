"""Command line entry point: run scenario subcommands, write artifacts.

Every subcommand takes a scenario (a file path or the name of a bundled
configuration), derives its own stage seed from the scenario seed, and
writes CSV/JSON artifacts into the output directory.  All artifacts embed
the scenario hash; re-running with the same scenario and seed reproduces
them byte for byte.  Run manifests additionally carry a wall-clock
timestamp in a dedicated field that is excluded from every hash and from
reproducibility comparisons.

Exit codes: 0 success, 1 validation or scenario errors, 2 numerical
failures (non-convergent fits and the like).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import DeconvolutionSettings, deconvolve, fit_erf_gate, fit_sine
from .detector import detection_limit
from .errors import NumericalError, ScenarioError, UcspdError, ValidationError
from .response import predict_measured, resolution_function
from .scenario import Scenario, load_scenario, scenario_with_seed
from .simulate import ScanConfig, delay_rate_function, derive_stage_seed, run_phase_sweep, run_scan
from .svgplot import line_plot
from .timebin import (
    InterferometerSpec,
    TimeBinState,
    apply_interferometer,
    center_bin_expectation,
    slot_probabilities,
    synthesize_waveform,
)
from .waveform import SampledWaveform, TimeGrid, fwhm, gaussian_waveform, write_csv

__all__ = ["main"]

_STAGE_SCAN = 1
_STAGE_SWEEP = 2
_STAGE_DECONV = 3

_SUBCOMMANDS = ("resolve", "scan", "sweep", "timebin", "limits", "deconv", "fitvis", "report")

_MODEL_VERSIONS = {
    "ucspd": __version__,
    "numpy": np.__version__,
    "scipy": scipy.__version__,
}


class _Parser(argparse.ArgumentParser):
    """Argparse that reports usage problems on exit code 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="ucspd",
        description="Simulate a femtosecond up-conversion single-photon detector.",
    )
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)
    for name, text in (
        ("resolve", "compute the temporal resolution function"),
        ("scan", "Monte Carlo delay scan of the configured signal"),
        ("sweep", "Monte Carlo phase sweep of the center time bin"),
        ("timebin", "time-bin state probabilities and waveforms"),
        ("limits", "detection limit versus pump power"),
        ("deconv", "delay scan plus deconvolution back to the input"),
        ("fitvis", "fringe fit of the phase sweep"),
        ("report", "full pipeline summary as a single JSON file"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("scenario_pos", nargs="?", metavar="SCENARIO",
                       help="scenario file path or bundled scenario name")
        p.add_argument("--scenario", help="scenario file path or bundled scenario name")
        p.add_argument("--out", help="output directory (default: scenario output_dir)")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="stdout format for the result summary")
        p.add_argument("--quiet", action="store_true", help="suppress success output")
    return parser


def _bundled_path(name: str):
    base = resources.files("ucspd") / "scenarios"
    for candidate in (name, name + ".scenario"):
        entry = base / candidate
        if entry.is_file():
            return entry
    return None


def _resolve_scenario(args) -> Scenario:
    ref = args.scenario
    if args.scenario_pos is not None:
        if ref is not None and ref != args.scenario_pos:
            raise ScenarioError(
                "scenario given both as a positional argument and with --scenario"
            )
        ref = args.scenario_pos
    if ref is None:
        raise ScenarioError(
            "no scenario given; pass a file path or one of the bundled names "
            + ", ".join(sorted(e.name for e in (resources.files("ucspd") / "scenarios").iterdir()))
        )
    if Path(ref).is_file():
        scenario = load_scenario(ref)
    else:
        bundled = _bundled_path(ref)
        if bundled is None:
            raise ScenarioError(f"scenario {ref!r} is neither a file nor a bundled name")
        scenario = load_scenario(bundled)
    if args.seed is not None:
        scenario = scenario_with_seed(scenario, args.seed)
    return scenario


# ---------------------------------------------------------------------------
# artifact writers


def _sig9(value: float) -> str:
    return f"{value:.9g}"


def _write_table(path, header: str, rows, metadata: dict) -> None:
    lines = [f"# {key}={value}" for key, value in metadata.items()]
    lines.append(header)
    for row in rows:
        lines.append(",".join(
            str(cell) if isinstance(cell, (int, np.integer)) else _sig9(float(cell))
            for cell in row
        ))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_json(path, payload: dict) -> None:
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _manifest(scenario: Scenario, stage: int, config: dict, content_files: dict) -> dict:
    return {
        "scenario": scenario.name,
        "scenario_hash": scenario.scenario_hash,
        "seed": scenario.seed,
        "stage_seed": derive_stage_seed(scenario.seed, stage),
        "rng_scheme": "pcg64 via SeedSequence(entropy=seed, spawn_key=(point_index,))",
        "model_versions": _MODEL_VERSIONS,
        "config": config,
        "content_sha256": {name: _file_sha256(p) for name, p in content_files.items()},
        "generated_utc": datetime.now(timezone.utc).isoformat(),
    }


def _meta(scenario: Scenario, **extra) -> dict:
    base = {"scenario": scenario.name, "scenario_hash": scenario.scenario_hash}
    base.update(extra)
    return base


def _plot(quiet: bool, *args, **kwargs) -> None:
    # plotting failures must never fail the numeric run
    try:
        line_plot(*args, **kwargs)
    except Exception as exc:  # noqa: BLE001
        if not quiet:
            print(f"ucspd: plot skipped: {exc}", file=sys.stderr)


# ---------------------------------------------------------------------------
# shared model construction


def _resolution_kernel(scenario: Scenario, dt_fs: float) -> SampledWaveform:
    half = 0.5 * scenario.crystal.gate_width_fs + 3.0 * scenario.pump_fwhm_fs + dt_fs
    grid = TimeGrid.symmetric(half, dt_fs)
    return resolution_function(scenario.pump_pulse, scenario.crystal, grid)


def _timebin_state(scenario: Scenario) -> TimeBinState:
    section = scenario.timebin
    state = TimeBinState.single(section.slot_spacing_fs)
    for phase in (section.phase_rad, section.phase_prime_rad):
        state = apply_interferometer(
            state, InterferometerSpec(phase_rad=phase, contrast=section.contrast)
        )
    return state


def _timebin_waveform(scenario: Scenario, dt_fs: float) -> SampledWaveform:
    state = _timebin_state(scenario)
    spacing = scenario.timebin.slot_spacing_fs
    n_slots = state.amplitudes.size
    margin = 3.0 * scenario.signal_fwhm_fs + dt_fs
    n = int(np.ceil(((n_slots - 1) * spacing + 2.0 * margin) / dt_fs)) + 1
    grid = TimeGrid(-margin, dt_fs, n)
    synthesized = synthesize_waveform(state, scenario.signal_fwhm_fs, grid)
    # center the pulse train on zero delay
    return synthesized.shifted(-0.5 * (n_slots - 1) * spacing)


def _scan_signal(scenario: Scenario, dt_fs: float) -> SampledWaveform:
    if scenario.scan.signal == "gaussian":
        half = 3.0 * scenario.signal_fwhm_fs + dt_fs
        grid = TimeGrid.symmetric(half, dt_fs)
        return gaussian_waveform(scenario.signal_pulse, grid)
    return _timebin_waveform(scenario, dt_fs)


def _scan_coordinates(scenario: Scenario) -> np.ndarray:
    section = scenario.scan
    return np.arange(
        section.start_fs, section.stop_fs + 0.5 * section.step_fs, section.step_fs
    )


def _run_delay_scan(scenario: Scenario, stage: int, noise_cps: float):
    dt = scenario.dt_fs
    kernel = _resolution_kernel(scenario, dt)
    signal = _scan_signal(scenario, dt)
    rate = delay_rate_function(
        signal,
        kernel,
        mean_photons_per_pulse=scenario.mean_photons_per_pulse,
        external_eta=scenario.external_eta_at(),
        rep_rate_hz=scenario.rep_rate_hz,
        noise_cps=noise_cps,
    )
    config = ScanConfig(
        coordinates=_scan_coordinates(scenario),
        dwell_s=scenario.scan.dwell_s,
        mean_photons_per_pulse=scenario.mean_photons_per_pulse,
        rep_rate_hz=scenario.rep_rate_hz,
        seed=derive_stage_seed(scenario.seed, stage),
        kind="delay",
    )
    return run_scan(config, rate)


def _run_sweep(scenario: Scenario):
    sweep = scenario.sweep
    phases = np.linspace(0.0, 2.0 * np.pi, sweep.n_points, endpoint=False)
    noise = scenario.noise_cps_at() if sweep.include_noise else 0.0
    result = run_phase_sweep(
        phases,
        contrast=scenario.timebin.contrast,
        counts_scale=sweep.counts_scale,
        noise_cps=noise,
        dwell_s=sweep.dwell_s,
        seed=derive_stage_seed(scenario.seed, _STAGE_SWEEP),
        decode_phase_rad=scenario.timebin.phase_prime_rad,
    )
    return phases, result


def _scan_rows(result) -> list:
    return [
        (coord, int(count), expected)
        for coord, count, expected in zip(result.coordinates, result.counts, result.expected)
    ]


# ---------------------------------------------------------------------------
# subcommands


def _cmd_resolve(scenario: Scenario, out: Path, quiet: bool) -> dict:
    kernel = _resolution_kernel(scenario, scenario.dt_fs)
    fwhm_fs = fwhm(kernel)
    csv_path = out / "resolution.csv"
    write_csv(csv_path, kernel, _meta(scenario, kind="resolution"))
    summary = {
        "scenario": scenario.name,
        "scenario_hash": scenario.scenario_hash,
        "L_mm": scenario.crystal.length_mm,
        "tau_g": scenario.crystal.tau_g_fs_per_mm,
        "label": scenario.crystal.label,
        "gate_width_fs": scenario.crystal.gate_width_fs,
        "fwhm_fs": fwhm_fs,
        "pump_fwhm_fs": scenario.pump_fwhm_fs,
        "pump_power_mw": scenario.pump_power_mw,
        "eta_internal": scenario.internal_eta_at(),
        "eta_external": scenario.external_eta_at(),
        "noise_cps": scenario.noise_cps_at(),
    }
    _write_json(out / "resolution.json", summary)
    _plot(
        quiet,
        out / "resolution.svg",
        [(kernel.times(), kernel.samples, scenario.crystal.label or "T(t)")],
        title=f"resolution function, FWHM {fwhm_fs:.1f} fs",
        x_label="t (fs)",
        y_label="T(t)",
        comment=f"scenario_hash={scenario.scenario_hash}",
    )
    return {
        "artifacts": ["resolution.csv", "resolution.json", "resolution.svg"],
        "summary": {"fwhm_fs": fwhm_fs, "gate_width_fs": scenario.crystal.gate_width_fs},
    }


def _cmd_scan(scenario: Scenario, out: Path, quiet: bool) -> dict:
    result = _run_delay_scan(scenario, _STAGE_SCAN, scenario.noise_cps_at())
    csv_path = out / "scan.csv"
    _write_table(
        csv_path,
        "coord,counts,expected",
        _scan_rows(result),
        _meta(
            scenario,
            kind="delay_scan",
            signal=scenario.scan.signal,
            dwell_s=scenario.scan.dwell_s,
            stage_seed=result.config.seed,
        ),
    )
    manifest = _manifest(
        scenario,
        _STAGE_SCAN,
        config={
            "kind": "delay",
            "signal": scenario.scan.signal,
            "start_fs": scenario.scan.start_fs,
            "stop_fs": scenario.scan.stop_fs,
            "step_fs": scenario.scan.step_fs,
            "dwell_s": scenario.scan.dwell_s,
            "noise_cps": scenario.noise_cps_at(),
        },
        content_files={"scan.csv": csv_path},
    )
    _write_json(out / "scan_manifest.json", manifest)
    _plot(
        quiet,
        out / "scan.svg",
        [
            (result.coordinates, result.counts, "counts"),
            (result.coordinates, result.expected, "expected"),
        ],
        title=f"delay scan ({scenario.scan.signal})",
        x_label="delay (fs)",
        y_label="counts",
        comment=f"scenario_hash={scenario.scenario_hash}",
    )
    return {
        "artifacts": ["scan.csv", "scan_manifest.json", "scan.svg"],
        "summary": {
            "points": int(result.coordinates.size),
            "peak_counts": int(result.counts.max()),
        },
    }


def _cmd_sweep(scenario: Scenario, out: Path, quiet: bool) -> dict:
    phases, result = _run_sweep(scenario)
    csv_path = out / "sweep.csv"
    _write_table(
        csv_path,
        "coord,counts,expected",
        _scan_rows(result),
        _meta(
            scenario,
            kind="phase_sweep",
            contrast=scenario.timebin.contrast,
            dwell_s=scenario.sweep.dwell_s,
            stage_seed=result.config.seed,
        ),
    )
    manifest = _manifest(
        scenario,
        _STAGE_SWEEP,
        config={
            "kind": "phase",
            "n_points": scenario.sweep.n_points,
            "dwell_s": scenario.sweep.dwell_s,
            "counts_scale": scenario.sweep.counts_scale,
            "include_noise": scenario.sweep.include_noise,
            "contrast": scenario.timebin.contrast,
        },
        content_files={"sweep.csv": csv_path},
    )
    _write_json(out / "sweep_manifest.json", manifest)
    _plot(
        quiet,
        out / "sweep.svg",
        [(phases, result.counts, "counts"), (phases, result.expected, "expected")],
        title="phase sweep of the center bin",
        x_label="phase (rad)",
        y_label="counts",
        comment=f"scenario_hash={scenario.scenario_hash}",
    )
    return {
        "artifacts": ["sweep.csv", "sweep_manifest.json", "sweep.svg"],
        "summary": {
            "points": int(phases.size),
            "peak_counts": int(result.counts.max()),
        },
    }


def _cmd_timebin(scenario: Scenario, out: Path, quiet: bool) -> dict:
    state = _timebin_state(scenario)
    probabilities = slot_probabilities(state)
    section = scenario.timebin
    payload = {
        "scenario": scenario.name,
        "scenario_hash": scenario.scenario_hash,
        "slot_spacing_fs": section.slot_spacing_fs,
        "phase_rad": section.phase_rad,
        "phase_prime_rad": section.phase_prime_rad,
        "contrast": section.contrast,
        "probabilities": [float(p) for p in probabilities],
        "center_bin_expectation": center_bin_expectation(
            section.phase_rad - section.phase_prime_rad, section.contrast
        ),
    }
    _write_json(out / "timebin_probabilities.json", payload)
    signal = _timebin_waveform(scenario, scenario.dt_fs)
    kernel = _resolution_kernel(scenario, scenario.dt_fs)
    measured = predict_measured(signal, kernel)
    write_csv(out / "timebin_state.csv", signal, _meta(scenario, kind="timebin_state"))
    write_csv(out / "timebin_measured.csv", measured, _meta(scenario, kind="timebin_measured"))
    _plot(
        quiet,
        out / "timebin.svg",
        [
            (signal.times(), signal.peak_normalized().samples, "input"),
            (measured.times(), measured.peak_normalized().samples, "through gate"),
        ],
        title="time-bin pulse train",
        x_label="t (fs)",
        y_label="normalized intensity",
        comment=f"scenario_hash={scenario.scenario_hash}",
    )
    return {
        "artifacts": [
            "timebin_probabilities.json",
            "timebin_state.csv",
            "timebin_measured.csv",
            "timebin.svg",
        ],
        "summary": {"probabilities": payload["probabilities"]},
    }


def _cmd_limits(scenario: Scenario, out: Path, quiet: bool) -> dict:
    section = scenario.limits
    rows = []
    for power in section.powers_mw():
        eta_int = scenario.internal_eta_at(power)
        eta_ext = scenario.external_eta_at(power)
        noise = scenario.noise_cps_at(power)
        limit = detection_limit(noise, section.integration_s, eta_ext, scenario.rep_rate_hz)
        rows.append((power, eta_int, eta_ext, noise, limit))
    csv_path = out / "limits.csv"
    _write_table(
        csv_path,
        "power_mw,eta_internal,eta_external,noise_cps,limit_per_pulse",
        rows,
        _meta(scenario, kind="limits", integration_s=section.integration_s),
    )
    limits = [row[4] for row in rows]
    best = int(np.argmin(limits))
    summary = {
        "scenario": scenario.name,
        "scenario_hash": scenario.scenario_hash,
        "integration_s": section.integration_s,
        "best_power_mw": rows[best][0],
        "min_limit_per_pulse": rows[best][4],
        "limit_at_scenario_power": detection_limit(
            scenario.noise_cps_at(),
            section.integration_s,
            scenario.external_eta_at(),
            scenario.rep_rate_hz,
        ),
    }
    _write_json(out / "limits.json", summary)
    _plot(
        quiet,
        out / "limits.svg",
        [([row[0] for row in rows], limits, "limit")],
        title="detection limit vs pump power",
        x_label="pump power (mW)",
        y_label="photons per pulse",
        comment=f"scenario_hash={scenario.scenario_hash}",
    )
    return {
        "artifacts": ["limits.csv", "limits.json", "limits.svg"],
        "summary": {
            "best_power_mw": summary["best_power_mw"],
            "min_limit_per_pulse": summary["min_limit_per_pulse"],
        },
    }


def _cmd_deconv(scenario: Scenario, out: Path, quiet: bool) -> dict:
    noise = scenario.noise_cps_at()
    result = _run_delay_scan(scenario, _STAGE_DECONV, noise)
    step = scenario.scan.step_fs
    scan_csv = out / "deconv_scan.csv"
    _write_table(
        scan_csv,
        "coord,counts,expected",
        _scan_rows(result),
        _meta(
            scenario,
            kind="delay_scan",
            signal=scenario.scan.signal,
            dwell_s=scenario.scan.dwell_s,
            stage_seed=result.config.seed,
        ),
    )
    # subtract the known flat background before the nonnegative inversion
    background = noise * scenario.scan.dwell_s
    samples = np.maximum(result.counts.astype(np.float64) - background, 0.0)
    measured = SampledWaveform(float(result.coordinates[0]), step, samples)
    kernel = _resolution_kernel(scenario, step)
    deconv = deconvolve(measured, kernel)
    write_csv(
        out / "deconv_recovered.csv",
        deconv.estimate,
        _meta(scenario, kind="deconv_recovered"),
    )
    report = {
        "scenario": scenario.name,
        "scenario_hash": scenario.scenario_hash,
        "stage_seed": result.config.seed,
        "background_cps": noise,
        "iterations_run": deconv.iterations_run,
        "converged": deconv.converged,
        "residual": deconv.residual,
        "max_flux_drift": deconv.max_flux_drift,
        "settings": {
            "algorithm": deconv.settings.algorithm,
            "iterations": deconv.settings.iterations,
            "stop_threshold": deconv.settings.stop_threshold,
        },
    }
    _write_json(out / "deconv_report.json", report)
    _plot(
        quiet,
        out / "deconv.svg",
        [
            (measured.times(), measured.peak_normalized().samples, "measured"),
            (
                deconv.estimate.times(),
                deconv.estimate.peak_normalized().samples,
                "recovered",
            ),
        ],
        title="deconvolution of the delay scan",
        x_label="t (fs)",
        y_label="normalized intensity",
        comment=f"scenario_hash={scenario.scenario_hash}",
    )
    return {
        "artifacts": [
            "deconv_scan.csv",
            "deconv_recovered.csv",
            "deconv_report.json",
            "deconv.svg",
        ],
        "summary": {
            "iterations_run": deconv.iterations_run,
            "residual": deconv.residual,
        },
    }


def _cmd_fitvis(scenario: Scenario, out: Path, quiet: bool) -> dict:
    phases, result = _run_sweep(scenario)
    fit = fit_sine(phases, result.counts, dwell_s=scenario.sweep.dwell_s)
    report = {
        "scenario": scenario.name,
        "scenario_hash": scenario.scenario_hash,
        "stage_seed": result.config.seed,
        "n_points": fit.n_points,
        "dwell_s": fit.dwell_s,
        "offset": fit.offset,
        "offset_sigma": fit.offset_sigma,
        "amplitude": fit.amplitude,
        "amplitude_sigma": fit.amplitude_sigma,
        "phase0_rad": fit.phase0_rad,
        "phase0_sigma_rad": fit.phase0_sigma_rad,
        "visibility": fit.visibility,
        "visibility_sigma": fit.visibility_sigma,
        "reduced_chi2": fit.reduced_chi2,
        "true_contrast": scenario.timebin.contrast,
    }
    _write_json(out / "fitvis_report.json", report)
    dense = np.linspace(phases[0], phases[-1], 241)
    model = fit.offset * (1.0 + fit.visibility * np.cos(dense - fit.phase0_rad))
    _plot(
        quiet,
        out / "fitvis.svg",
        [(phases, result.counts, "counts"), (dense, model, "fit")],
        title=f"fringe fit, V = {fit.visibility:.4f} +/- {fit.visibility_sigma:.4f}",
        x_label="phase (rad)",
        y_label="counts",
        comment=f"scenario_hash={scenario.scenario_hash}",
    )
    return {
        "artifacts": ["fitvis_report.json", "fitvis.svg"],
        "summary": {
            "visibility": fit.visibility,
            "visibility_sigma": fit.visibility_sigma,
        },
    }


def _embedded_hash(path: Path) -> str | None:
    """The scenario hash a file claims to belong to, if it claims one."""
    try:
        if path.suffix == ".json":
            payload = json.loads(path.read_text(encoding="utf-8"))
            value = payload.get("scenario_hash") if isinstance(payload, dict) else None
            return value if isinstance(value, str) else None
        if path.suffix in (".csv", ".svg"):
            with open(path, "r", encoding="utf-8") as handle:
                for _, line in zip(range(40), handle):
                    if "scenario_hash=" in line:
                        tail = line.split("scenario_hash=", 1)[1]
                        return tail.strip().rstrip("->").strip()
    except (OSError, ValueError):
        return None
    return None


def _refuse_mismatched(out: Path, scenario: Scenario) -> None:
    mismatched = []
    if out.is_dir():
        for path in sorted(out.iterdir()):
            if not path.is_file():
                continue
            claimed = _embedded_hash(path)
            if claimed is not None and claimed != scenario.scenario_hash:
                mismatched.append(f"{path.name} ({claimed})")
    if mismatched:
        raise ScenarioError(
            f"output directory {out} holds artifacts from a different scenario "
            f"hash than {scenario.scenario_hash}: " + ", ".join(mismatched)
        )


def _cmd_report(scenario: Scenario, out: Path, quiet: bool) -> dict:
    _refuse_mismatched(out, scenario)
    kernel = _resolution_kernel(scenario, scenario.dt_fs)
    fwhm_fs = fwhm(kernel)

    gate_fit = None
    if scenario.scan.signal == "gaussian":
        scan = _run_delay_scan(scenario, _STAGE_SCAN, scenario.noise_cps_at())
        fitted = fit_erf_gate(scan, scenario.pump_fwhm_fs, scenario.signal_fwhm_fs)
        gate_fit = {
            "gate_width_fs": fitted.gate_width_fs,
            "gate_width_sigma_fs": fitted.gate_width_sigma_fs,
            "center_fs": fitted.center_fs,
            "residual": fitted.residual,
        }

    phases, sweep_result = _run_sweep(scenario)
    vis = fit_sine(phases, sweep_result.counts, dwell_s=scenario.sweep.dwell_s)

    state = _timebin_state(scenario)
    summary = {
        "scenario": scenario.name,
        "scenario_hash": scenario.scenario_hash,
        "seed": scenario.seed,
        "model_versions": _MODEL_VERSIONS,
        "fwhm_fs": fwhm_fs,
        "gate_width_fs": scenario.crystal.gate_width_fs,
        "gate_fit": gate_fit,
        "eta_internal": scenario.internal_eta_at(),
        "eta_external": scenario.external_eta_at(),
        "noise_cps": scenario.noise_cps_at(),
        "limit_per_pulse": detection_limit(
            scenario.noise_cps_at(),
            scenario.limits.integration_s,
            scenario.external_eta_at(),
            scenario.rep_rate_hz,
        ),
        "visibility": {"value": vis.visibility, "sigma": vis.visibility_sigma},
        "timebin_probabilities": [float(p) for p in slot_probabilities(state)],
    }
    _write_json(out / "report_summary.json", summary)
    return {
        "artifacts": ["report_summary.json"],
        "summary": {
            "fwhm_fs": fwhm_fs,
            "eta_external": summary["eta_external"],
            "limit_per_pulse": summary["limit_per_pulse"],
            "visibility": vis.visibility,
        },
    }


_DISPATCH = {
    "resolve": _cmd_resolve,
    "scan": _cmd_scan,
    "sweep": _cmd_sweep,
    "timebin": _cmd_timebin,
    "limits": _cmd_limits,
    "deconv": _cmd_deconv,
    "fitvis": _cmd_fitvis,
    "report": _cmd_report,
}


def _emit_success(args, scenario: Scenario, outcome: dict, out: Path) -> None:
    if args.quiet:
        return
    if args.format == "json":
        print(json.dumps(
            {
                "subcommand": args.subcommand,
                "scenario": scenario.name,
                "scenario_hash": scenario.scenario_hash,
                "out": str(out),
                "artifacts": outcome["artifacts"],
                "summary": outcome["summary"],
            },
            sort_keys=True,
        ))
        return
    for name in outcome["artifacts"]:
        print(f"wrote,{out / name}")
    for key, value in outcome["summary"].items():
        print(f"{key},{value}")


def _emit_error(args, exc: Exception, exit_code: int) -> None:
    fmt = getattr(args, "format", "csv") if args is not None else "csv"
    if fmt == "json":
        print(json.dumps(
            {
                "error": {
                    "type": type(exc).__name__,
                    "message": str(exc),
                    "exit_code": exit_code,
                }
            },
            sort_keys=True,
        ))
    else:
        print(f"ucspd: error: {exc}", file=sys.stderr)


def main(argv=None) -> int:
    parser = _build_parser()
    args = None
    try:
        args = parser.parse_args(argv)
        if args.subcommand is None:
            parser.print_usage(sys.stderr)
            print("ucspd: error: a subcommand is required", file=sys.stderr)
            return 1
        scenario = _resolve_scenario(args)
        out = Path(args.out) if args.out else Path(scenario.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        outcome = _DISPATCH[args.subcommand](scenario, out, args.quiet)
        _emit_success(args, scenario, outcome, out)
        return 0
    except _UsageError as exc:
        print(f"ucspd: error: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        _emit_error(args, exc, 1)
        return 1
    except NumericalError as exc:
        _emit_error(args, exc, 2)
        return 2
    except UcspdError as exc:
        _emit_error(args, exc, 1)
        return 1


if __name__ == "__main__":
    sys.exit(main())
