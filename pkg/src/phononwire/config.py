"""Run configuration: schema, validation and Hz to rad/s conversion.

Config files are YAML (JSON is accepted too).  Every frequency or rate key
carries an ``_hz`` suffix and is given in Hz; values are converted to rad/s
once, here.  Defaults follow the fitted parameters of the measured device.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .core import (BathOccupancies, LocalizedTransducer, ModelError, WaveguideModeSet,
                   TWO_PI, intracavity_photons)


class ConfigError(ModelError):
    """Invalid configuration; the message names the offending field."""


_REQ = object()

# name -> (kind, default); kind is "hz", "float", "int", "bool", "str", "list", "any"
SCHEMA = {
    "system": {
        "kappa_hz": ("hz", 1.0e9),
        "kappa_i_hz": ("hz", None),
        "kappa_e_hz": ("hz", 2.0e8),
        "g0_hz": ("hz", 6.9e5),
        "gamma_i_hz": ("hz", 1.22e5),
        "omega_m_hz": ("hz", 4.393e9),
        "omega_c_hz": ("hz", 1.922e14),
        "delta_hz": ("hz", 4.217e9),
    },
    "waveguide": {
        "modes": ("list", None),
        "comb": ("any", None),
    },
    "drive": {
        "n_c": ("list", [1100.0]),
        "power_w": ("list", None),
    },
    "grid": {
        "start_hz": ("hz", None),
        "stop_hz": ("hz", None),
        "n_points": ("int", 4001),
        "half_width_hz": ("hz", None),
    },
    "baths": {
        "n_local": ("float", 87.0),
        "n_wg": ("any", 87.0),
        "floor": ("float", 0.0),
    },
    "simulate": {
        "phase_noise_rad": ("float", 0.0),
        "psd_noise": ("float", 0.0),
    },
    "fit": {
        "datasets": ("list", None),
        "method": ("str", "least_squares"),
        "staged": ("bool", True),
        "per_dataset_delta": ("bool", True),
        "linear_phase": ("bool", False),
        "max_nfev": ("int", 4000),
        "seed_peaks": ("bool", False),
        "peak_max_width_hz": ("hz", 3.0e5),
        "fixed": ("list", []),
    },
    "thermal_fit": {
        "path": ("str", None),
        "n_c": ("float", None),
        "nonnegative": ("bool", False),
        "n_i": ("float", None),
        "calibration": ("any", None),
    },
    "metrics": {
        "v_g": ("float", 6800.0),
        "length": ("float", 3.0e-3),
        "gamma_k_i_hz": ("hz", 2.2e4),
        "n_i": ("float", 0.0),
        "sigma_hz": ("hz", None),
    },
    "disorder": {
        "v_g": ("float", 6800.0),
        "a": ("float", 450e-9),
        "length": ("float", 2.0e-3),
        "band_center_hz": ("hz", 4.393e9),
        "delta_omega_hz": ("hz", 1.0e7),
        "n_realizations": ("int", 100),
        "window_fraction": ("float", 0.05),
        "gamma_e_hz": ("hz", None),
        "bins": ("int", 30),
    },
    "dephasing": {
        "sigma_hz": ("hz", 2.31e5),
        "v_g": ("float", 6800.0),
        "t_max": ("float", 4.0e-6),
        "n_points": ("int", 401),
    },
}
TOP_LEVEL = {"seed": ("int", 0), "version": ("any", None)}

MODE_KEYS = {"omega_hz", "f_hz", "gamma_i_hz"}
COMB_KEYS = {"n_modes": ("int", _REQ), "spacing_hz": ("hz", _REQ), "f_hz": ("hz", _REQ),
             "gamma_i_hz": ("hz", _REQ), "offset_hz": ("hz", 0.0)}
CALIBRATION_KEYS = {"eta_s", "eta_f", "eta_c", "G_EDFA", "A", "R", "Z_o", "omega_p_hz", "G_R"}
_OTHER_UNITS = ("_rad_s", "_rads", "_khz", "_mhz", "_ghz", "_rad")


def _location(err) -> str:
    mark = getattr(err, "problem_mark", None)
    if mark is None:
        return ""
    return f" at line {mark.line + 1}, column {mark.column + 1}"


def _check_key(block: str, key: str, allowed) -> None:
    if key in allowed:
        return
    where = f"{block}.{key}" if block else key
    for suffix in _OTHER_UNITS:
        if key.endswith(suffix) and key[: -len(suffix)] + "_hz" in allowed:
            raise ConfigError(f"unit-suffix mismatch for {where}: give the value in Hz as "
                              f"{key[: -len(suffix)]}_hz")
    if key + "_hz" in allowed:
        raise ConfigError(f"unit-suffix mismatch for {where}: frequencies need the _hz suffix "
                          f"({key}_hz, in Hz)")
    raise ConfigError(f"unknown config key {where}")


def _coerce(where: str, kind: str, value):
    if value is None:
        return None
    try:
        if kind in ("hz", "float"):
            if isinstance(value, bool):
                raise TypeError
            out = float(value)
            if not np.isfinite(out):
                raise ValueError
            return out
        if kind == "int":
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            return int(value)
        if kind == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind == "str":
            if not isinstance(value, str):
                raise TypeError
            return value
        if kind == "list":
            return list(value) if isinstance(value, (list, tuple)) else [value]
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected {kind}, got {value!r}") from None
    return value


@dataclass
class RunConfig:
    """Validated configuration.  Frequencies are held in Hz; use the accessors for rad/s."""

    blocks: dict
    seed: int = 0
    text: str = ""
    path: Optional[str] = None
    overrides: dict = field(default_factory=dict)

    def __getitem__(self, block):
        return self.blocks[block]

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    # --- typed accessors (rad/s) ---
    def transducer(self) -> LocalizedTransducer:
        s = self.blocks["system"]
        kappa_i = s["kappa_i_hz"]
        if kappa_i is None:
            kappa_i = s["kappa_hz"] - s["kappa_e_hz"]
            if kappa_i <= 0:
                raise ConfigError("system.kappa_hz must exceed system.kappa_e_hz")
        return LocalizedTransducer(
            kappa_i=TWO_PI * kappa_i, kappa_e=TWO_PI * s["kappa_e_hz"], g0=TWO_PI * s["g0_hz"],
            gamma_i=TWO_PI * s["gamma_i_hz"], omega_m=TWO_PI * s["omega_m_hz"],
            omega_c=TWO_PI * s["omega_c_hz"], delta=TWO_PI * s["delta_hz"])

    def waveguide(self) -> WaveguideModeSet:
        w = self.blocks["waveguide"]
        if w["modes"]:
            return WaveguideModeSet.from_modes(
                [(TWO_PI * m["omega_hz"], TWO_PI * m["f_hz"], TWO_PI * m["gamma_i_hz"])
                 for m in w["modes"]])
        if w["comb"]:
            c = w["comb"]
            return WaveguideModeSet.comb(TWO_PI * self.blocks["system"]["omega_m_hz"],
                                         c["n_modes"], TWO_PI * c["spacing_hz"],
                                         TWO_PI * c["f_hz"], TWO_PI * c["gamma_i_hz"],
                                         offset=TWO_PI * c["offset_hz"])
        return WaveguideModeSet.empty()

    def photon_numbers(self) -> list:
        d = self.blocks["drive"]
        if d["power_w"]:
            sys = self.transducer()
            return [float(intracavity_photons(p, sys)) for p in d["power_w"]]
        return [float(n) for n in d["n_c"]]

    def baths(self, n_modes: int) -> BathOccupancies:
        b = self.blocks["baths"]
        n_wg = np.atleast_1d(np.asarray(b["n_wg"], dtype=float))
        if n_wg.size == 1:
            n_wg = np.full(n_modes, n_wg[0])
        if n_wg.size != n_modes:
            raise ConfigError(f"baths.n_wg has {n_wg.size} entries for {n_modes} modes")
        return BathOccupancies(b["n_local"], n_wg, b["floor"])

    def grid(self, sys, wg) -> np.ndarray:
        from .core import default_grid
        g = self.blocks["grid"]
        if g["start_hz"] is not None or g["stop_hz"] is not None:
            if g["start_hz"] is None or g["stop_hz"] is None or g["stop_hz"] <= g["start_hz"]:
                raise ConfigError("grid needs start_hz < stop_hz")
            return np.linspace(TWO_PI * g["start_hz"], TWO_PI * g["stop_hz"], g["n_points"])
        hw = None if g["half_width_hz"] is None else TWO_PI * g["half_width_hz"]
        return default_grid(sys, wg, n_points=g["n_points"], half_width=hw)


def _validate_modes(modes):
    out = []
    for i, m in enumerate(modes):
        if not isinstance(m, dict):
            raise ConfigError(f"waveguide.modes[{i}] must be a mapping")
        for k in m:
            _check_key(f"waveguide.modes[{i}]", k, MODE_KEYS)
        missing = MODE_KEYS - set(m)
        if missing:
            raise ConfigError(f"waveguide.modes[{i}] missing {', '.join(sorted(missing))}")
        out.append({k: _coerce(f"waveguide.modes[{i}].{k}", "hz", v) for k, v in m.items()})
    return out


def _validate_sub(where, data, schema):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    for k in data:
        _check_key(where, k, schema)
    out = {}
    for k, (kind, default) in schema.items():
        if k in data:
            out[k] = _coerce(f"{where}.{k}", kind, data[k])
        elif default is _REQ:
            raise ConfigError(f"{where} missing required field {k}")
        else:
            out[k] = default
    return out


def _validate_physics(blocks):
    s = blocks["system"]
    for k in ("kappa_hz", "kappa_e_hz", "g0_hz", "gamma_i_hz", "omega_m_hz", "omega_c_hz"):
        if s[k] is not None and s[k] <= 0:
            raise ConfigError(f"system.{k[:-3]} must be positive (field {k})")
    if s["kappa_i_hz"] is not None and s["kappa_i_hz"] <= 0:
        raise ConfigError("system.kappa_i must be positive (field kappa_i_hz)")
    for k in ("v_g", "length", "gamma_k_i_hz"):
        if blocks["metrics"][k] <= 0:
            raise ConfigError(f"metrics.{k} must be positive")
    d = blocks["disorder"]
    if d["n_realizations"] < 1:
        raise ConfigError("disorder.n_realizations must be >= 1")
    if d["delta_omega_hz"] < 0:
        raise ConfigError("disorder.delta_omega_hz must be non-negative")


def validate(raw: Any, text: str = "", path=None) -> RunConfig:
    """Check ``raw`` (parsed document) against the schema and fill defaults."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping of blocks")
    allowed = set(SCHEMA) | set(TOP_LEVEL)
    for k in raw:
        _check_key("", k, allowed)
    blocks = {}
    for name, schema in SCHEMA.items():
        blocks[name] = _validate_sub(name, raw.get(name, {}) or {}, schema)
    w = blocks["waveguide"]
    if w["modes"] and w["comb"]:
        raise ConfigError("waveguide: give either modes or comb, not both")
    if w["modes"]:
        w["modes"] = _validate_modes(w["modes"])
    if w["comb"]:
        w["comb"] = _validate_sub("waveguide.comb", w["comb"], COMB_KEYS)
    cal = blocks["thermal_fit"]["calibration"]
    if cal is not None:
        if not isinstance(cal, dict):
            raise ConfigError("thermal_fit.calibration must be a mapping")
        for k in cal:
            _check_key("thermal_fit.calibration", k, CALIBRATION_KEYS)
    datasets = blocks["fit"]["datasets"]
    if datasets:
        for i, ds in enumerate(datasets):
            _validate_sub(f"fit.datasets[{i}]", ds, {"path": ("str", _REQ),
                                                     "n_c": ("float", _REQ)})
    _validate_physics(blocks)
    seed = _coerce("seed", "int", raw.get("seed", 0))
    return RunConfig(blocks, seed=seed, text=text, path=None if path is None else str(path))


def parse_config_text(text: str, path=None) -> RunConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"cannot parse config{_location(err)}: "
                          f"{getattr(err, 'problem', None) or err}") from None
    return validate(raw, text=text, path=path)


def load_config(path) -> RunConfig:
    """Read, parse and validate a YAML or JSON config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    # decode bytes directly so line endings survive into the result envelope
    return parse_config_text(path.read_bytes().decode("utf-8"), path=path)


def apply_override(cfg: RunConfig, dotted: str, value: str) -> None:
    """Set a scalar ``block.key`` from a command-line string."""
    if "." not in dotted:
        raise ConfigError(f"override {dotted!r} must be block.key")
    block, key = dotted.split(".", 1)
    if block not in SCHEMA:
        raise ConfigError(f"unknown config block {block}")
    _check_key(block, key, SCHEMA[block])
    kind = SCHEMA[block][key][0]
    if kind not in ("hz", "float", "int", "bool", "str"):
        raise ConfigError(f"{dotted} is not a scalar field")
    parsed = yaml.safe_load(value)
    cfg.blocks[block][key] = _coerce(dotted, kind, parsed)
    cfg.overrides[dotted] = cfg.blocks[block][key]
    _validate_physics(cfg.blocks)
