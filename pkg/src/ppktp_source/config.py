"""Run configuration: a JSON file with named sections, unknown keys rejected.

Sections and defaults live in ``DEFAULTS``. Bundled presets (``lab``,
``ideal``) are found by name; anything else is read as a path.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from importlib import resources
from pathlib import Path

from .dispersion import CrystalSpec, get_material
from .focusing import OBJECTIVES
from .phasematching import PumpSpec
from .sagnac import Imperfections

DEFAULTS = {
    "crystal": {
        "length_mm": 25.0,
        "poling_period_um": 10.0,
        "material": "KTP",
        "reference_temperature_C": 25.0,
    },
    "pump": {
        "wavelength_nm": 405.0,
        "power_mw": 1.0,
    },
    "imperfections": {
        "pbs_extinction": None,  # null means ideal (infinite)
        "hwp1_angle_error_rad": 0.0,
        "hwp1_retardance_error_rad": 0.0,
        "path_transmission": 1.0,
        "detector_efficiency": 1.0,
        "dark_count_rate_per_s": 0.0,
        "coincidence_window_ns": 4.4,
        "polarizer_extinction": None,
        # optional [[wavelength_nm, transmission], ...]
        "transmission_table": [],
    },
    "source": {
        # detected pairs/s per mW of pump per √mm of crystal
        "rate_coefficient": 16220.0,
        # null: closed-form bandwidth of the crystal
        "bandwidth_nm": None,
        # fraction of the loss-limited coupling ratio reached
        "mode_overlap": 1.0,
        # null: run at the degeneracy temperature
        "temperature_C": None,
        "focus_objective": "max_pairs",
    },
    "simulation": {
        # detected pairs/s in one complete tomography basis; null: R_c at pump power
        "flux_pairs_per_s": None,
        "integration_time_s": 10.0,
        "seed": None,
        "mc_runs": 100,
        "include_accidentals": True,
    },
    "output": {
        "directory": ".",
        "format": "csv",
    },
}

PRESETS = ("lab", "ideal")


class ConfigError(ValueError):
    pass


def _merge(base, overrides, where="config"):
    out = copy.deepcopy(base)
    if not isinstance(overrides, dict):
        raise ConfigError(f"{where}: expected an object")
    for key, value in overrides.items():
        if key not in base:
            raise ConfigError(f"{where}: unknown key {key!r}; allowed: {sorted(base)}")
        if isinstance(base[key], dict):
            out[key] = _merge(base[key], value, f"{where}.{key}")
        else:
            out[key] = value
    return out


def load_config(source=None):
    """Resolved config dict from a preset name, a JSON path, a dict, or None (defaults)."""
    if source is None:
        raw = {}
    elif isinstance(source, dict):
        raw = source
    elif str(source) in PRESETS:
        text = resources.files("ppktp_source").joinpath("data").joinpath("presets").joinpath(
            f"{source}.json").read_text(encoding="utf-8")
        raw = json.loads(text)
    else:
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"config {source!r} is neither a preset {PRESETS} nor an existing file")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    cfg = _merge(DEFAULTS, raw)
    validate(cfg)
    return cfg


def validate(cfg):
    c, p, s, sim = cfg["crystal"], cfg["pump"], cfg["source"], cfg["simulation"]
    for name, v in (("crystal.length_mm", c["length_mm"]), ("crystal.poling_period_um", c["poling_period_um"]),
                    ("pump.wavelength_nm", p["wavelength_nm"]), ("pump.power_mw", p["power_mw"]),
                    ("source.rate_coefficient", s["rate_coefficient"]),
                    ("simulation.integration_time_s", sim["integration_time_s"])):
        if not isinstance(v, (int, float)) or not v > 0:
            raise ConfigError(f"{name} must be a positive number, got {v!r}")
    if s["bandwidth_nm"] is not None and not s["bandwidth_nm"] > 0:
        raise ConfigError("source.bandwidth_nm must be positive or null")
    if not 0 < s["mode_overlap"] <= 1:
        raise ConfigError("source.mode_overlap must lie in (0, 1]")
    if sim["flux_pairs_per_s"] is not None and not sim["flux_pairs_per_s"] > 0:
        raise ConfigError("simulation.flux_pairs_per_s must be positive or null")
    if not (isinstance(sim["mc_runs"], int) and sim["mc_runs"] >= 2):
        raise ConfigError("simulation.mc_runs must be an integer ≥ 2")
    if sim["seed"] is not None and not isinstance(sim["seed"], int):
        raise ConfigError("simulation.seed must be an integer or null")
    if s["focus_objective"] not in OBJECTIVES:
        raise ConfigError(f"source.focus_objective must be one of {OBJECTIVES}")
    if cfg["output"]["format"] not in ("csv", "json"):
        raise ConfigError("output.format must be 'csv' or 'json'")
    try:
        get_material(c["material"])
        imperfections(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def config_hash(cfg):
    """sha256 of the canonical JSON of every section except ``output``."""
    physics = {k: v for k, v in cfg.items() if k != "output"}
    blob = json.dumps(physics, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def crystal(cfg):
    c = cfg["crystal"]
    return CrystalSpec(float(c["length_mm"]), float(c["poling_period_um"]), get_material(c["material"]),
                       float(c["reference_temperature_C"]))


def pump(cfg):
    return PumpSpec(float(cfg["pump"]["wavelength_nm"]), float(cfg["pump"]["power_mw"]))


def _ratio(v):
    return math.inf if v is None else float(v)


def imperfections(cfg):
    i = cfg["imperfections"]
    return Imperfections(
        pbs_extinction=_ratio(i["pbs_extinction"]),
        hwp1_angle_error=float(i["hwp1_angle_error_rad"]),
        hwp1_retardance_error=float(i["hwp1_retardance_error_rad"]),
        path_transmission=float(i["path_transmission"]),
        detector_efficiency=float(i["detector_efficiency"]),
        dark_count_rate=float(i["dark_count_rate_per_s"]),
        coincidence_window=float(i["coincidence_window_ns"]),
        polarizer_extinction=_ratio(i["polarizer_extinction"]),
        transmission_table=tuple(tuple(float(x) for x in row) for row in i["transmission_table"]),
    )
