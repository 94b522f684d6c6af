"""File formats: sweep-dataset CSV, simulator/manifest YAML, VNA traces, JSON reports."""

from __future__ import annotations

import hashlib
import json
import math
import re
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .physics import CalibrationParams, ReceiverConfig
from .simulate import FluxSweepRecord, NoiseConfig, PlanckCurve, SnailModel, SweepDataset, ThermalLoadModel

DATASET_MAGIC = "planck2d-dataset v1"
VNA_MAGIC = "planck2d-vna-trace v1"
REPORT_SCHEMA = "planck2d-report/1"
COLUMNS = ("T_mc", "T_att", "P", "sigma_P")
TEMPERATURE_UNITS = {"K": 1.0, "mK": 1e-3}


class FormatError(ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.line = line


class ConfigError(ValueError):
    pass


def _g(x: float) -> str:
    return format(float(x), ".17g")


# -- temperatures -------------------------------------------------------------

_TEMP_RE = re.compile(r"^\s*([-+0-9.eE]+)\s*(mK|K)?\s*$")


def parse_temperature(value) -> float:
    """Kelvin from a number (already K) or a string such as ``'100mK'`` / ``'0.1 K'``."""
    if isinstance(value, bool):
        raise ConfigError(f"not a temperature: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    m = _TEMP_RE.match(str(value))
    if not m:
        raise ConfigError(f"not a temperature: {value!r}")
    return float(m.group(1)) * TEMPERATURE_UNITS[m.group(2) or "K"]


# -- datasets -------------------------------------------------------------------


def write_dataset(ds: SweepDataset, path, temperature_unit: str = "K", power_unit: str = "(mV)^2/Ohm") -> None:
    if temperature_unit not in TEMPERATURE_UNITS:
        raise ValueError(f"temperature unit must be one of {sorted(TEMPERATURE_UNITS)}")
    scale = 1.0 / TEMPERATURE_UNITS[temperature_unit]
    lines = [
        f"# {DATASET_MAGIC}",
        f"# temperature_unit: {temperature_unit}",
        f"# power_unit: {power_unit}",
        "# receiver: " + json.dumps(ds.receiver.to_dict(), sort_keys=True),
        "# provenance: " + json.dumps(ds.provenance, sort_keys=True, default=float),
        ",".join(COLUMNS),
    ]
    for c in ds.curves:
        for t, p, s in zip(c.T_att, c.P, c.sigma_P):
            lines.append(",".join((_g(c.T_mc * scale), _g(t * scale), _g(p), _g(s))))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_dataset(path) -> SweepDataset:
    """Load a dataset CSV; temperatures are converted to kelvin.

    Raises :class:`FormatError` naming the offending line for malformed input.
    """
    path = Path(path)
    header = {}
    rows = {}
    seen_columns = False
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, _, val = body.partition(":")
                    header[key.strip()] = val.strip()
                continue
            if not seen_columns:
                cols = tuple(c.strip() for c in line.split(","))
                if cols != COLUMNS:
                    raise FormatError(f"expected column header {','.join(COLUMNS)}", path, lineno)
                seen_columns = True
                if "temperature_unit" not in header or "power_unit" not in header:
                    raise FormatError("missing unit declaration (temperature_unit and power_unit "
                                      "header lines are required)", path, lineno)
                unit = header["temperature_unit"]
                if unit not in TEMPERATURE_UNITS:
                    raise FormatError(f"unknown temperature unit {unit!r}", path)
                tscale = TEMPERATURE_UNITS[unit]
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise FormatError(f"expected 4 fields, got {len(parts)}", path, lineno)
            try:
                T_mc, T_att, P, s = (float(x) for x in parts)
            except ValueError:
                raise FormatError(f"non-numeric field in row {line!r}", path, lineno) from None
            if not all(math.isfinite(v) for v in (T_mc, T_att, P, s)) or s <= 0 or T_att < 0 or T_mc < 0:
                raise FormatError(f"invalid values in row {line!r}", path, lineno)
            rows.setdefault(T_mc, []).append((T_att, P, s, lineno))
    if not seen_columns:
        if "temperature_unit" not in header:
            raise FormatError("missing unit declaration", path)
        raise FormatError("no column header found", path)
    if not rows:
        raise FormatError("dataset has no rows", path)

    curves = []
    for T_mc, pts in rows.items():
        pts.sort(key=lambda r: r[0])
        T_att = np.array([p[0] for p in pts])
        dup = np.flatnonzero(np.diff(T_att) <= 0)
        if dup.size:
            raise FormatError(f"duplicate T_att within curve T_mc={T_mc}", path, pts[dup[0] + 1][3])
        curves.append(PlanckCurve(T_mc * tscale, T_att * tscale,
                                  np.array([p[1] for p in pts]), np.array([p[2] for p in pts])))
    try:
        receiver = ReceiverConfig(**json.loads(header["receiver"])) if "receiver" in header else ReceiverConfig()
        provenance = json.loads(header["provenance"]) if "provenance" in header else {}
    except (ValueError, TypeError) as exc:
        raise FormatError(f"bad header: {exc}", path) from None
    provenance["power_unit"] = header["power_unit"]
    return SweepDataset(curves, receiver, provenance)


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- VNA traces ------------------------------------------------------------------


def write_vna_trace(records, path) -> None:
    lines = [f"# {VNA_MAGIC}", "# bias_unit: uA", "# level_unit: dB", "I_dc,delta_tau,sigma"]
    for r in sorted(records, key=lambda r: r.I_dc):
        lines.append(",".join((_g(r.I_dc), _g(r.delta_tau), _g(r.sigma))))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_vna_trace(path) -> list:
    path = Path(path)
    out, header_seen = [], False
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line.replace(" ", "") != "I_dc,delta_tau,sigma":
                raise FormatError("expected column header I_dc,delta_tau,sigma", path, lineno)
            header_seen = True
            continue
        try:
            I, tau, s = (float(x) for x in line.split(","))
        except ValueError:
            raise FormatError(f"malformed row {line!r}", path, lineno) from None
        out.append(FluxSweepRecord(I, -tau + 0.0, s, "vna"))
    if not out:
        raise FormatError("trace has no rows", path)
    return out


# -- configs -------------------------------------------------------------------


def load_yaml(path) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def _temps(d: dict, keys) -> dict:
    out = dict(d)
    for k in keys:
        if k in out:
            v = out[k]
            out[k] = [parse_temperature(x) for x in v] if isinstance(v, (list, tuple)) else parse_temperature(v)
    return out


def simulation_from_config(cfg: dict):
    """Parse a simulator config into ``(truth, receiver, plan_kwargs, thermal, noise, eta_of_tmc)``."""
    try:
        t = cfg["truth"]
        if "eta" in t:
            truth = CalibrationParams(float(t["kappa"]), float(t["n_H"]), float(t["eta"]))
        else:
            truth = CalibrationParams.from_loss_db(float(t["kappa"]), float(t["n_H"]), float(t["loss_dB"]))
        receiver = ReceiverConfig(**{k: float(v) for k, v in cfg.get("receiver", {}).items()})
        plan = _temps(cfg.get("plan", {}), ("T_mc", "margin", "stabilization_tolerance"))
        plan_kwargs = {
            "T_mc_list": plan.get("T_mc", [0.1, 0.15, 0.2, 0.25, 0.3, 0.35]),
            "points_per_curve": int(plan.get("points_per_curve", 20)),
            "margin": plan.get("margin", 0.025),
            "spacing": plan.get("spacing", "log"),
            "stabilization_tolerance": plan.get("stabilization_tolerance", 1e-4),
        }
        thermal = cfg.get("thermal_model")
        thermal = ThermalLoadModel.from_dict(
            _temps(thermal, ("base_T_mc", "table_T_att", "table_T_mc", "T_unloaded", "T_att_limit"))
        ) if thermal else ThermalLoadModel()
        n = _temps(cfg.get("noise", {}), ("temperature_jitter_sigma",))
        noise = NoiseConfig(
            mode=n.get("mode", "radiometer"),
            t_int=float(n["t_int"]) if "t_int" in n else None,
            rng_seed=int(n.get("rng_seed", 0)),
            temperature_jitter_sigma=float(n.get("temperature_jitter_sigma", 1e-4)),
        )
        eta_of_tmc = None
        if "eta_drift" in cfg:
            d = _temps(cfg["eta_drift"], ("above_T_mc",))
            above, factor = float(d["above_T_mc"]), float(d["factor"])
            base_eta = truth.eta

            def eta_of_tmc(T, above=above, factor=factor, base_eta=base_eta):
                return base_eta * factor if T > above + 1e-12 else base_eta
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid simulator config: {exc!r}") from None
    return truth, receiver, plan_kwargs, thermal, noise, eta_of_tmc


def snail_from_config(cfg: dict) -> SnailModel:
    try:
        return SnailModel.from_dict(cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid SNAIL model: {exc}") from None


def read_manifest(path) -> tuple:
    """Flux manifest: ``datasets`` maps bias (uA) to dataset paths relative to
    the manifest; optional ``vna_trace`` path."""
    path = Path(path)
    data = load_yaml(path)
    if "datasets" not in data or not isinstance(data["datasets"], dict):
        raise ConfigError(f"{path}: manifest needs a 'datasets' mapping of I_dc -> path")
    datasets = {}
    for k, v in data["datasets"].items():
        try:
            I = float(k)
        except ValueError:
            raise ConfigError(f"{path}: bias key {k!r} is not a number") from None
        datasets[I] = (path.parent / v).resolve()
    vna = data.get("vna_trace")
    return datasets, ((path.parent / vna).resolve() if vna else None)


def write_manifest(path, datasets: dict, vna_trace=None) -> None:
    data = {"datasets": {float(k): str(v) for k, v in sorted(datasets.items())}}
    if vna_trace:
        data["vna_trace"] = str(vna_trace)
    Path(path).write_text(yaml.safe_dump(data, sort_keys=True), encoding="utf-8")


# -- reports -----------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def build_report(command: str, result: dict, inputs=()) -> dict:
    """Report body plus a digest of the body; the timestamp sits outside the digest."""
    body = {
        "schema": REPORT_SCHEMA,
        "tool": "planck2d",
        "version": __version__,
        "command": command,
        "inputs": [{"path": Path(p).name, "sha256": file_digest(p)} for p in inputs],
        "result": _jsonable(result),
    }
    canonical = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return {
        **body,
        "body_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def report_body(report: dict) -> dict:
    return {k: v for k, v in report.items() if k not in ("generated_at", "body_sha256")}


def write_report(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
