"""Batch command-line surface: design, optimize, sweep, simulate, analyze, report.

Configuration is a single JSON document with named sections mirroring the
model dataclasses (geometry, mode, quality/devices, pump, source,
detectors, franson) plus run controls. The schema rejects unknown keys.
Every report embeds the SHA-256 of the config file and the effective seed,
and re-running a command with the same inputs reproduces the output
byte for byte.

Exit codes: 0 success, 2 config/schema error, 3 IO/format error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, analysis, resonator, sfwm, simulate, tags
from .errors import (ConfigError, DomainError, EventCapExceeded, FitDegenerate,
                     FitDiverged, InconsistentBudget, InsufficientData,
                     ModeNumberUndefined, NoResonance, NoTrueCoincidences,
                     TagFormatError, UnstableEstimate)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

_NUMERIC_ERRORS = (DomainError, NoResonance, FitDiverged, FitDegenerate,
                   InsufficientData, ModeNumberUndefined, NoTrueCoincidences,
                   InconsistentBudget, UnstableEstimate, EventCapExceeded)

_NUMBER = {"type": "number"}
_DEVICE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["q_intrinsic", "q_external"],
    "properties": {
        "label": {"type": "string"},
        "q_intrinsic": _NUMBER,
        "q_external": _NUMBER,
    },
}
_DETECTOR = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "efficiency": _NUMBER,
        "dark_rate": _NUMBER,
        "jitter_sigma": _NUMBER,
        "dead_time": _NUMBER,
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer"},
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "required": ["radius"],
            "properties": {"radius": _NUMBER},
        },
        "mode": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n_eff", "n_g", "a_eff", "n2", "beta2", "ref_wavelength"],
            "properties": {
                "n_eff": _NUMBER, "n_g": _NUMBER, "a_eff": _NUMBER,
                "n2": _NUMBER, "beta2": _NUMBER, "ref_wavelength": _NUMBER,
            },
        },
        "quality": _DEVICE,
        "devices": {"type": "array", "items": _DEVICE, "minItems": 1},
        "pump": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"power_mw": _NUMBER, "wavelength_nm": _NUMBER},
        },
        "source": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "emitted_pair_rate": _NUMBER,
                "pair_rate_quadratic_coeff": _NUMBER,
                "noise_rate_linear_coeff": {
                    "type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2},
                "correlation_fwhm": _NUMBER,
                "thermal_mode_count": {"type": "integer"},
            },
        },
        "detectors": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "signal": _DETECTOR, "idler": _DETECTOR,
                "signal1": _DETECTOR, "signal2": _DETECTOR,
            },
        },
        "franson": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "umi_delay": _NUMBER, "phase_alpha": _NUMBER, "phase_beta": _NUMBER,
                "folded": {"type": "boolean"}, "intrinsic_visibility": _NUMBER,
            },
        },
        "run": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "experiment": {"enum": ["pair", "hbt", "franson"]},
                "duration": _NUMBER,
                "pump_mw": _NUMBER,
                "splitter_ratio": _NUMBER,
                "phases": {"type": "array", "items": _NUMBER},
                "output_prefix": {"type": "string"},
            },
        },
        "optimize": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "q_intrinsic": _NUMBER,
                "objective": {"enum": ["max_generation", "max_emitted"]},
                "grid_points": {"type": "integer"},
                "grid_span_decades": _NUMBER,
            },
        },
        "analyze": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "histogram": {
                    "type": "object", "additionalProperties": False,
                    "properties": {
                        "ch_a": {"type": "integer"}, "ch_b": {"type": "integer"},
                        "bin_width": _NUMBER, "span": _NUMBER,
                    },
                },
                "car": {
                    "type": "object", "additionalProperties": False,
                    "properties": {"window": _NUMBER},
                },
                "power_fit": {
                    "type": "object", "additionalProperties": False,
                    "required": ["points"],
                    "properties": {"points": {"type": "array", "items": {
                        "type": "array", "items": _NUMBER,
                        "minItems": 2, "maxItems": 2}}},
                },
                "g2h": {
                    "type": "object", "additionalProperties": False,
                    "properties": {
                        "window": _NUMBER,
                        "tau_grid": {"type": "array", "items": _NUMBER},
                        "herald_ch": {"type": "integer"},
                        "s1_ch": {"type": "integer"}, "s2_ch": {"type": "integer"},
                    },
                },
                "g2uh": {
                    "type": "object", "additionalProperties": False,
                    "properties": {
                        "ch_a": {"type": "integer"}, "ch_b": {"type": "integer"},
                        "tau_grid": {"type": "array", "items": _NUMBER},
                        "bin_width": _NUMBER,
                    },
                },
                "efficiency": {
                    "type": "object", "additionalProperties": False,
                    "properties": {
                        "window": _NUMBER, "noise_fraction_s": _NUMBER,
                        "noise_fraction_i": _NUMBER, "dark_s": _NUMBER,
                        "dark_i": _NUMBER,
                    },
                },
                "visibility": {
                    "type": "object", "additionalProperties": False,
                    "required": ["phases"],
                    "properties": {
                        "phases": {"type": "array", "items": _NUMBER},
                        "window": _NUMBER, "span": _NUMBER,
                        "side_peak_delay": _NUMBER,
                    },
                },
                "chsh": {"type": "object", "additionalProperties": False,
                         "properties": {}},
            },
        },
    },
}


def load_config(path: str) -> tuple[dict, str]:
    """Parse and schema-validate a config file; returns (config, sha256)."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: at {where}: {exc.message}") from exc
    return cfg, hashlib.sha256(raw).hexdigest()


def _require(cfg: dict, section: str) -> dict:
    if section not in cfg:
        raise ConfigError(f"missing required config section '{section}'")
    return cfg[section]


def _mode_from_config(cfg: dict) -> resonator.ModeProperties:
    m = _require(cfg, "mode")
    return resonator.ModeProperties.from_waveguide(**m)


def _pump_from_config(cfg: dict) -> sfwm.PumpConfig:
    p = cfg.get("pump", {})
    return sfwm.PumpConfig(
        power=p.get("power_mw", 1.0) * 1e-3,
        wavelength=p.get("wavelength_nm", 1540.5) * 1e-9,
    )


def _source_from_config(cfg: dict) -> simulate.SourceModel:
    s = dict(_require(cfg, "source"))
    if "noise_rate_linear_coeff" in s:
        s["noise_rate_linear_coeff"] = tuple(s["noise_rate_linear_coeff"])
    return simulate.SourceModel(**s)


def _detector_from_config(cfg: dict, name: str) -> simulate.DetectorModel:
    d = cfg.get("detectors", {}).get(name, {})
    return simulate.DetectorModel(**d)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else repr(v) for v in row])


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_design(cfg: dict, cfg_hash: str, out: Path, fmt: str) -> int:
    geom = resonator.RingGeometry.from_radius(_require(cfg, "geometry")["radius"])
    mode = _mode_from_config(cfg)
    pump = _pump_from_config(cfg)
    omega0 = pump.omega0
    devices = cfg.get("devices") or [_require(cfg, "quality")]

    fsr = resonator.fsr_from_radius(geom.radius, mode.n_g)
    rows = []
    for i, dev in enumerate(devices):
        q = resonator.QualityFactors.from_intrinsic_external(
            dev["q_intrinsic"], dev["q_external"])
        t_min, er = resonator.transmission_extremum(q)
        alpha = omega0 / (q.q_intrinsic * mode.group_velocity)
        kappa_sq = omega0 * geom.roundtrip_length / (mode.group_velocity * q.q_external)
        rows.append({
            "label": dev.get("label", f"device_{i}"),
            "q_intrinsic": q.q_intrinsic,
            "q_external": q.q_external,
            "q_loaded": q.q_loaded,
            "fwhm_hz": omega0 / (2.0 * math.pi) / q.q_loaded,
            "extinction_ratio_db": er,
            "t_min": t_min,
            "regime": q.regime.value,
            "alpha_per_m": alpha,
            "kappa_sq": kappa_sq,
        })
    report = {
        "tool": "ringpair design",
        "version": __version__,
        "config_sha256": cfg_hash,
        "seed": cfg.get("seed", 0),
        "fsr_hz": fsr,
        "radius_m": geom.radius,
        "roundtrip_length_m": geom.roundtrip_length,
        "omega0_rad_s": omega0,
        "devices": rows,
    }
    _write_json(out / "design.json", report)
    header = list(rows[0].keys())
    _write_csv(out / "design.csv", header, ([r[k] for k in header] for r in rows))
    print(f"design: {len(rows)} device(s), FSR {fsr / 1e9:.2f} GHz -> {out}")
    return EXIT_OK


def cmd_optimize(cfg: dict, cfg_hash: str, out: Path, fmt: str,
                 objective: str | None) -> int:
    opt = _require(cfg, "optimize")
    objective = objective or opt.get("objective", "max_emitted")
    qi = opt["q_intrinsic"]
    qe_star = sfwm.optimize_external_q(qi, objective)

    mode = _mode_from_config(cfg)
    geom = resonator.RingGeometry.from_radius(_require(cfg, "geometry")["radius"])
    pump = _pump_from_config(cfg)
    n_grid = int(opt.get("grid_points", 25))
    span = float(opt.get("grid_span_decades", 2.0))
    grid_q = np.logspace(math.log10(qi) - span / 2, math.log10(qi) + span / 2, n_grid)
    rows = sfwm.sweep_rates(mode, geom, pump, grid_q, grid_q)
    sfwm.write_sweep_csv(rows, out / "sweep.csv")

    report = {
        "tool": "ringpair optimize",
        "version": __version__,
        "config_sha256": cfg_hash,
        "seed": cfg.get("seed", 0),
        "objective": objective,
        "q_intrinsic": qi,
        "q_external_opt": qe_star,
        "ratio": qe_star / qi,
        "sweep_csv": "sweep.csv",
    }
    _write_json(out / "optimize.json", report)
    print(f"optimize[{objective}]: Qe* = {qe_star:.6g} (Qe*/Qi = {qe_star / qi:.6f})")
    return EXIT_OK


def cmd_sweep(cfg: dict, cfg_hash: str, out: Path, fmt: str) -> int:
    opt = _require(cfg, "optimize")
    qi = opt["q_intrinsic"]
    mode = _mode_from_config(cfg)
    geom = resonator.RingGeometry.from_radius(_require(cfg, "geometry")["radius"])
    pump = _pump_from_config(cfg)
    n_grid = int(opt.get("grid_points", 25))
    span = float(opt.get("grid_span_decades", 2.0))
    grid_q = np.logspace(math.log10(qi) - span / 2, math.log10(qi) + span / 2, n_grid)
    rows = sfwm.sweep_rates(mode, geom, pump, grid_q, grid_q)
    sfwm.write_sweep_csv(rows, out / "sweep.csv")
    print(f"sweep: {len(rows)} grid points -> {out / 'sweep.csv'}")
    return EXIT_OK


def _simulate_one(cfg: dict, experiment: str, pump_mw: float, duration: float,
                  seed: int, phase: float | None) -> tags.TimeTagStream:
    source = _source_from_config(cfg)
    if experiment == "pair":
        return simulate.simulate_pair_source(
            source, _detector_from_config(cfg, "signal"),
            _detector_from_config(cfg, "idler"), pump_mw, duration, seed)
    if experiment == "hbt":
        run = cfg.get("run", {})
        return simulate.simulate_hbt(
            source, _detector_from_config(cfg, "idler"),
            _detector_from_config(cfg, "signal1"), _detector_from_config(cfg, "signal2"),
            run.get("splitter_ratio", 0.5), pump_mw, duration, seed)
    fr = dict(cfg.get("franson", {}))
    if phase is not None:
        fr["phase_alpha"] = phase
    return simulate.simulate_franson(
        source, simulate.FransonConfig(**fr),
        _detector_from_config(cfg, "signal"), _detector_from_config(cfg, "idler"),
        pump_mw, duration, seed)


def cmd_simulate(cfg: dict, cfg_hash: str, out: Path, fmt: str, seed: int) -> int:
    run = _require(cfg, "run")
    experiment = run.get("experiment", "pair")
    duration = run.get("duration", 1.0)
    pump_mw = run.get("pump_mw", 1.0)
    prefix = run.get("output_prefix", "tags")
    phases = run.get("phases")

    files = []
    if experiment == "franson" and phases:
        for i, phase in enumerate(phases):
            stream = _simulate_one(cfg, experiment, pump_mw, duration, seed + i, phase)
            name = f"{prefix}_{i:02d}.{ 'csv' if fmt == 'csv' else 'qtag' }"
            _write_stream(stream, out / name, fmt)
            files.append({"file": name, "phase_alpha": phase, "seed": seed + i,
                          "records": stream.n_records,
                          "counts": stream.counts_by_channel()})
    else:
        stream = _simulate_one(cfg, experiment, pump_mw, duration, seed, None)
        name = f"{prefix}.{ 'csv' if fmt == 'csv' else 'qtag' }"
        _write_stream(stream, out / name, fmt)
        files.append({"file": name, "seed": seed, "records": stream.n_records,
                      "counts": stream.counts_by_channel()})

    _write_json(out / f"{prefix}_provenance.json", {
        "tool": "ringpair simulate",
        "version": __version__,
        "config_sha256": cfg_hash,
        "seed": seed,
        "experiment": experiment,
        "duration": duration,
        "pump_mw": pump_mw,
        "files": files,
    })
    total = sum(f["records"] for f in files)
    print(f"simulate[{experiment}]: {len(files)} file(s), {total} records -> {out}")
    return EXIT_OK


def _write_stream(stream: tags.TimeTagStream, path: Path, fmt: str) -> None:
    if fmt == "csv":
        tags.write_tag_csv(stream, path)
    else:
        tags.write_qtag(stream, path)


def _read_stream(path: Path) -> tags.TimeTagStream:
    if path.suffix == ".csv":
        return tags.read_tag_csv(path)
    return tags.read_qtag(path)


def _hist_counts_at(hist: analysis.CoincidenceHistogram, center_s: float,
                    window_s: float) -> float:
    sel = np.abs(hist.delays - center_s) <= window_s / 2.0
    return float(hist.counts[sel].sum())


def cmd_analyze(cfg: dict, cfg_hash: str, out: Path, fmt: str,
                tag_files: list[str]) -> int:
    spec = _require(cfg, "analyze")
    streams = [_read_stream(Path(p)) for p in tag_files]
    report: dict = {
        "tool": "ringpair analyze",
        "version": __version__,
        "config_sha256": cfg_hash,
        "seed": cfg.get("seed", 0),
        "inputs": list(tag_files),
        "results": {},
    }
    res = report["results"]
    first = streams[0] if streams else None

    hist = None
    if "histogram" in spec or "car" in spec or "efficiency" in spec:
        h = spec.get("histogram", {})
        if first is None:
            raise TagFormatError("histogram analysis requires at least one tag file")
        hist = analysis.coincidence_histogram(
            first, h.get("ch_a", 0), h.get("ch_b", 1),
            h.get("bin_width", 100e-12), h.get("span", 50e-9))
        _write_csv(out / "histogram.csv", ["delay_ps", "counts"],
                   ((int(round(d * 1e12)), int(c))
                    for d, c in zip(hist.delays, hist.counts)))
        res["histogram"] = {
            "bin_width_s": hist.bin_width,
            "total_counts": int(hist.counts.sum()),
            "peak_counts": int(hist.counts.max()) if hist.counts.size else 0,
            "peak_delay_s": float(hist.delays[int(np.argmax(hist.counts))])
            if hist.counts.size else math.nan,
            "csv": "histogram.csv",
            "empty": bool(hist.counts.sum() == 0),
        }

    if "car" in spec and hist is not None:
        if hist.counts.sum() == 0:
            res["car"] = {"car": None, "note": "zero-count histogram"}
        else:
            r = analysis.car(hist, spec["car"].get("window", 1.6e-9))
            res["car"] = {
                "car": r.car, "true_cc_per_s": r.true_cc,
                "accidental_cc_per_s": r.accidental_cc,
                "coincidence_counts": r.coincidence_counts,
                "accidental_counts": r.accidental_counts,
                "is_lower_bound": r.is_lower_bound,
            }

    if "power_fit" in spec:
        fit = analysis.fit_power_quadratic(spec["power_fit"]["points"])
        res["power_fit"] = {
            "a_per_mw2": fit.a, "b_per_mw": fit.b,
            "covariance": fit.covariance.tolist(),
            "residual_norm": fit.residual_norm,
        }

    if "g2h" in spec:
        if first is None:
            raise TagFormatError("g2h analysis requires a tag file")
        g = spec["g2h"]
        curve = analysis.heralded_g2(
            first, g.get("window", 1.6e-9), g.get("tau_grid", [0.0]),
            g.get("herald_ch", 0), g.get("s1_ch", 1), g.get("s2_ch", 2))
        _write_csv(out / "g2h.csv", ["tau_s", "g2h", "n123", "n13"],
                   zip(curve.tau, curve.g2, curve.n123, curve.n13))
        res["g2h"] = {"zero_delay": None if math.isnan(curve.zero_delay)
                      else curve.zero_delay,
                      "n1": curve.n1, "n12": curve.n12, "csv": "g2h.csv"}

    if "g2uh" in spec:
        if first is None:
            raise TagFormatError("g2uh analysis requires a tag file")
        g = spec["g2uh"]
        curve = analysis.unheralded_g2(
            first, g.get("ch_a", 1), g.get("ch_b", 2), g.get("tau_grid", [0.0]),
            g.get("bin_width"))
        _write_csv(out / "g2uh.csv", ["tau_s", "g2"], zip(curve.tau, curve.g2))
        entry = {"zero_delay": curve.zero_delay, "csv": "g2uh.csv"}
        if curve.zero_delay > 1.0:
            entry["effective_mode_number"] = analysis.effective_mode_number(
                curve.zero_delay)
        res["g2uh"] = entry

    if "efficiency" in spec and hist is not None:
        e = spec["efficiency"]
        r = analysis.car(hist, e.get("window", 1.6e-9))
        counts = first.counts_by_channel()
        duration = first.duration
        inv = analysis.collection_efficiency(
            counts.get(0, 0) / duration, counts.get(1, 0) / duration,
            r.coincidence_counts / duration, r.accidental_counts / duration,
            e.get("noise_fraction_s", 0.0), e.get("noise_fraction_i", 0.0),
            e.get("dark_s", 0.0), e.get("dark_i", 0.0))
        res["efficiency"] = {"eta_s": inv.eta_s, "eta_i": inv.eta_i, "n_c": inv.n_c}

    if "visibility" in spec:
        v = spec["visibility"]
        phases = v["phases"]
        if len(phases) != len(streams):
            raise ConfigError(
                f"visibility needs one tag file per phase: {len(phases)} phases, "
                f"{len(streams)} files")
        window = v.get("window", 5e-9)
        span = v.get("span", 80e-9)
        side = v.get("side_peak_delay", cfg.get("franson", {}).get("umi_delay", 10e-9))
        scan = []
        for phase, stream in zip(phases, streams):
            h = analysis.coincidence_histogram(stream, 0, 1, window / 4.0, span)
            coincidences = _hist_counts_at(h, 0.0, window)
            off = np.abs(h.delays) > side + 2.0 * window
            acc_per_bin = float(h.counts[off].mean()) if np.any(off) else 0.0
            n_bins = max(1, int(round(window / h.bin_width)))
            scan.append((phase, coincidences, acc_per_bin * n_bins))
        fit = analysis.fit_visibility(scan)
        _write_csv(out / "visibility_scan.csv",
                   ["phase_rad", "coincidences", "accidentals"], scan)
        res["visibility"] = {
            "v_raw": fit.v_raw, "v_raw_sigma": fit.v_raw_sigma,
            "v_subtracted": fit.v_subtracted,
            "v_subtracted_sigma": fit.v_subtracted_sigma,
            "csv": "visibility_scan.csv",
        }

    if "chsh" in spec:
        if "visibility" not in res:
            raise ConfigError("chsh analysis requires the visibility analysis")
        v = min(res["visibility"]["v_subtracted"], 1.0)
        bell = analysis.chsh_from_visibility(v, res["visibility"]["v_subtracted_sigma"])
        res["chsh"] = {
            "visibility": bell.visibility,
            "s_value": bell.s_value, "s_sigma": bell.s_sigma,
            "violation_sigmas": bell.violation_sigmas,
            "classical_visibility_bound": bell.classical_visibility_bound,
        }

    _write_json(out / "analysis.json", report)
    print(f"analyze: {', '.join(res.keys()) or 'nothing requested'} -> "
          f"{out / 'analysis.json'}")
    return EXIT_OK


def cmd_report(inputs: list[str], out: Path) -> int:
    merged = {"tool": "ringpair report", "version": __version__, "reports": []}
    for p in inputs:
        try:
            merged["reports"].append(json.loads(Path(p).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise TagFormatError(f"cannot read report {p}: {exc}") from exc
    _write_json(out / "report.json", merged)
    print(f"report: merged {len(inputs)} report(s) -> {out / 'report.json'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ringpair",
        description="Micro-ring photon-pair source design, simulation, and analysis.")
    ap.add_argument("--config", help="pipeline config JSON")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--format", choices=["json", "csv"], default="json",
                    help="preferred output flavor for bulk data")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("design", help="Q/ER/coupling design table from device parameters")
    p = sub.add_parser("optimize", help="optimal external Q at fixed intrinsic Q")
    p.add_argument("--objective", choices=["max_generation", "max_emitted"])
    sub.add_parser("sweep", help="rate grid over (Qi, Qe) for contour plots")
    sub.add_parser("simulate", help="generate time-tag files")
    p = sub.add_parser("analyze", help="run estimators over time-tag files")
    p.add_argument("tags", nargs="*", help="time-tag files (.qtag or .csv)")
    p = sub.add_parser("report", help="merge analysis reports")
    p.add_argument("inputs", nargs="+", help="analysis JSON files")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "report":
            return cmd_report(args.inputs, out)
        if not args.config:
            raise ConfigError(f"'{args.command}' requires --config")
        cfg, cfg_hash = load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        if args.command == "design":
            return cmd_design(cfg, cfg_hash, out, args.format)
        if args.command == "optimize":
            return cmd_optimize(cfg, cfg_hash, out, args.format, args.objective)
        if args.command == "sweep":
            return cmd_sweep(cfg, cfg_hash, out, args.format)
        if args.command == "simulate":
            return cmd_simulate(cfg, cfg_hash, out, args.format, seed)
        if args.command == "analyze":
            return cmd_analyze(cfg, cfg_hash, out, args.format, args.tags)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TagFormatError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except _NUMERIC_ERRORS as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
