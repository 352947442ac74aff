"""Scenario configuration: JSON parsing, presets and validation.

Units follow the scheme.  For Rb schemes frequencies are quoted in MHz and
mean ``value * 2pi`` rad/us; times are in us.  For the ideal scheme every
frequency is in units of gamma and times in 1/gamma.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from math import sqrt
from typing import Any

import numpy as np

from .atoms import (
    MHZ_PER_GAUSS,
    AtomicScheme,
    BFieldConfig,
    CavityConfig,
    SchemeKind,
    build_scheme,
    coupling_for_mode_volume,
    mhz,
)

SCHEMA_VERSION = 1

VERBS = (
    "ideal-vstirap-sweep",
    "ideal-reprep-sweep",
    "rb-vstirap-sweep",
    "rb-reprep",
    "rb-pumping",
    "rb-burst",
    "bfield-scan",
    "optimize",
)


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


# named presets; values in config units
PRESETS: dict[str, dict] = {
    # C = 10 cavity on the D2 line, kappa = 2 MHz
    "cavity-table1": {"cooperativity": 10.0, "kappa": 2.0},
    "stirap-d1-150ns": {"T": 0.15, "omega": 41.0, "n": 6, "a": 11.0},
    "stirap-d2-150ns": {"T": 0.15, "omega": 49.0, "n": 6, "a": 11.0},
    "stirap-ideal": {"T": 10.0, "omega": 100.0, "n": 6, "a": 14.0},
    "pumping-d1": {"delta1": 4.0, "delta2": -7.5, "omega1": 34.0, "omega2": 24.0},
    "pumping-d2": {"delta1": 4.0, "delta2": -7.5, "omega1": 57.5, "omega2": 25.5},
}

DEFAULTS: dict[str, dict] = {
    "ideal-vstirap-sweep": {
        "scheme": "ideal",
        "pulse": {"T": 10.0, "detuning": 0.0},
        "sweep": {"axes": [
            {"name": "g", "values": [10.0]},
            {"name": "kappa", "start": 1.0, "stop": 80.0, "steps": 10, "scale": "log"},
        ]},
        "optimize": {"bounds": {"omega": [0.5, 100.0]}, "seeds": 6, "budget": 60},
    },
    "ideal-reprep-sweep": {
        "scheme": "ideal",
        "stirap": "stirap-ideal",
        "sweep": {"axes": [
            {"name": "T", "values": [2.0, 5.0, 10.0]},
            {"name": "omega", "values": [10.0, 50.0, 100.0]},
        ]},
    },
    "rb-vstirap-sweep": {
        "scheme": "rb_d2",
        "cavity": "cavity-table1",
        "pulse": {"T": 0.5, "omega": 43.0, "detuning": 0.0},
        "sweep": {"axes": [{"name": "mF", "values": [-2, -1, 0, 1, 2]}]},
    },
    "rb-reprep": {
        "scheme": "rb_d1",
        "stirap": "stirap-d1-150ns",
        "sweep": {"axes": []},
    },
    "rb-pumping": {
        "scheme": "rb_d1",
        "pumping": "pumping-d1",
        "duration": 8.0,
        "dt": 0.01,
    },
    "rb-burst": {
        "burst": {"n": 10, "mode": "incoherent"},
    },
    "bfield-scan": {
        "scheme": "rb_d1",
        "cavity": "cavity-table1",
        "pulse": {"T": 0.5, "omega": 30.0},
        "sweep": {"axes": [{"name": "splitting", "start": 0.0, "stop": 2.0, "steps": 11}]},
    },
    "optimize": {
        "scheme": "rb_d1",
        "target": "stirap",
        "stirap": "stirap-d1-150ns",
        "optimize": {"bounds": {"a": [6.0, 16.0], "omega": [20.0, 80.0]}, "n_values": [6], "seeds": 4,
                     "budget": 60},
    },
}


def load_json(text: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"line {err.lineno}", err.msg) from None
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    return data


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve(verb: str, user: dict | None = None) -> dict:
    """Defaults for ``verb`` overlaid with ``user``; string sections name presets."""
    if verb not in VERBS:
        raise ConfigError("verb", f"unknown verb {verb!r}")
    user = dict(user or {})
    cfg = copy.deepcopy(DEFAULTS[verb])
    for key in ("cavity", "stirap", "pumping"):
        if isinstance(user.get(key), str):
            cfg.pop(key, None)
        elif isinstance(cfg.get(key), str) and isinstance(user.get(key), dict):
            cfg[key] = _preset(cfg[key], key)
    if isinstance(user.get("cavity"), dict) and isinstance(cfg.get("cavity"), dict):
        # a user-given coupling replaces the default one
        if any(k in user["cavity"] for k in _COUPLING_KEYS):
            for k in _COUPLING_KEYS:
                cfg["cavity"].pop(k, None)
    cfg = deep_merge(cfg, user)
    for key in ("cavity", "stirap", "pumping"):
        if isinstance(cfg.get(key), str):
            cfg[key] = _preset(cfg[key], key)
    cfg["verb"] = verb
    validate(cfg)
    return cfg


_COUPLING_KEYS = ("g", "cooperativity", "mode_volume", "calibration")


def _preset(name: str, key: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ConfigError(key, f"unknown preset {name!r}") from None


# ----------------------------------------------------------------------------
# validation


def _num(cfg: dict, path: str, *, positive=False, nonneg=False, integer=False, required=True):
    node: Any = cfg
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError(path, "missing")
            return None
        node = node[part]
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(path, f"expected a number, got {node!r}")
    if not np.isfinite(node):
        raise ConfigError(path, "must be finite")
    if integer and int(node) != node:
        raise ConfigError(path, "must be an integer")
    if positive and node <= 0:
        raise ConfigError(path, f"must be positive (got {node})")
    if nonneg and node < 0:
        raise ConfigError(path, f"must be non-negative (got {node})")
    return node


def validate(cfg: dict) -> None:
    verb = cfg["verb"]
    if "scheme" in cfg:
        try:
            SchemeKind(cfg["scheme"])
        except ValueError:
            raise ConfigError("scheme", f"unknown scheme {cfg['scheme']!r}") from None
    if verb.startswith("ideal") and cfg.get("scheme") != "ideal":
        raise ConfigError("scheme", f"{verb} needs the ideal scheme")
    if verb in ("rb-vstirap-sweep", "rb-reprep", "rb-pumping", "bfield-scan") and cfg.get("scheme") == "ideal":
        raise ConfigError("scheme", f"{verb} needs an Rb scheme")
    if isinstance(cfg.get("cavity"), dict):
        cav = cfg["cavity"]
        _num(cfg, "cavity.kappa", positive=True)
        given = [k for k in ("g", "cooperativity", "mode_volume") if k in cav]
        if len(given) != 1:
            raise ConfigError("cavity", "give exactly one of g, cooperativity, mode_volume")
        if "g" in cav:
            _num(cfg, "cavity.g", nonneg=True)
        if "cooperativity" in cav:
            _num(cfg, "cavity.cooperativity", nonneg=True)
        if "mode_volume" in cav:
            _num(cfg, "cavity.mode_volume", positive=True)
            cal = cav.get("calibration")
            if not (isinstance(cal, list) and len(cal) == 2):
                raise ConfigError("cavity.calibration", "expected [volume, g] of a D1 reference cavity")
            if not all(isinstance(x, (int, float)) and x > 0 for x in cal):
                raise ConfigError("cavity.calibration", "entries must be positive")
        _num(cfg, "cavity.detuning", required=False)
        _num(cfg, "cavity.fock_dim", integer=True, required=False)
        if cav.get("fock_dim", 3) < 2:
            raise ConfigError("cavity.fock_dim", "must be at least 2")
    if isinstance(cfg.get("pulse"), dict):
        _num(cfg, "pulse.T", positive=True)
        _num(cfg, "pulse.omega", nonneg=True, required=False)
        _num(cfg, "pulse.detuning", required=False)
    if isinstance(cfg.get("stirap"), dict):
        _num(cfg, "stirap.T", positive=True)
        _num(cfg, "stirap.omega", nonneg=True)
        n = _num(cfg, "stirap.n", positive=True, integer=True)
        if n > 10:
            raise ConfigError("stirap.n", "must lie in 1..10")
        _num(cfg, "stirap.a", positive=True)
    if isinstance(cfg.get("pumping"), dict):
        for k in ("delta1", "delta2"):
            _num(cfg, f"pumping.{k}")
        for k in ("omega1", "omega2"):
            _num(cfg, f"pumping.{k}", nonneg=True)
    if verb == "rb-pumping":
        _num(cfg, "duration", positive=True)
        _num(cfg, "dt", positive=True)
    if verb == "rb-burst":
        n = _num(cfg, "burst.n", positive=True, integer=True)
        mode = cfg["burst"].get("mode")
        if mode not in ("coherent", "incoherent"):
            raise ConfigError("burst.mode", "must be 'coherent' or 'incoherent'")
        rate = cfg["burst"].get("rate", "2mhz" if mode == "coherent" else None)
        if mode == "coherent" and rate not in ("1mhz", "2mhz"):
            raise ConfigError("burst.rate", "coherent bursts run at '1mhz' or '2mhz'")
    if verb == "optimize":
        if cfg.get("target") not in ("vstirap", "stirap", "pumping"):
            raise ConfigError("target", "must be one of vstirap, stirap, pumping")
    if "optimize" in cfg:
        opt = cfg["optimize"]
        if not isinstance(opt, dict):
            raise ConfigError("optimize", "expected an object")
        budget = _num(cfg, "optimize.budget", positive=True, integer=True, required=False)
        for name, b in opt.get("bounds", {}).items():
            if not (isinstance(b, list) and len(b) == 2 and all(isinstance(x, (int, float)) for x in b)):
                raise ConfigError(f"optimize.bounds.{name}", "expected [low, high]")
            if not (np.isfinite(b[0]) and np.isfinite(b[1])) or b[1] < b[0]:
                raise ConfigError(f"optimize.bounds.{name}", "bounds must be finite and ordered")
    for i, axis in enumerate(cfg.get("sweep", {}).get("axes", [])):
        sweep_values(axis, f"sweep.axes[{i}]")


def sweep_values(axis: dict, where: str = "sweep") -> list:
    if not isinstance(axis, dict) or "name" not in axis:
        raise ConfigError(where, "axis needs a name")
    if "values" in axis:
        vals = axis["values"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"{where}.values", "must be a non-empty list")
        return list(vals)
    try:
        start, stop, steps = float(axis["start"]), float(axis["stop"]), int(axis["steps"])
    except (KeyError, TypeError, ValueError):
        raise ConfigError(where, "give either values or start/stop/steps") from None
    if steps < 1:
        raise ConfigError(f"{where}.steps", "must be at least 1")
    scale = axis.get("scale", "linear")
    if scale == "log":
        if start <= 0 or stop <= 0:
            raise ConfigError(where, "log axes need positive endpoints")
        vals = np.geomspace(start, stop, steps)
    elif scale == "linear":
        vals = np.linspace(start, stop, steps)
    else:
        raise ConfigError(f"{where}.scale", f"unknown scale {scale!r}")
    return [float(v) for v in vals]


def sweep_points(cfg: dict) -> list[dict]:
    """Cartesian product of the sweep axes in row-major order."""
    axes = cfg.get("sweep", {}).get("axes", [])
    points = [{}]
    for i, axis in enumerate(axes):
        vals = sweep_values(axis, f"sweep.axes[{i}]")
        points = [{**p, axis["name"]: v} for p in points for v in vals]
    return points


# ----------------------------------------------------------------------------
# config -> physics objects


def freq(cfg: dict, value: float) -> float:
    """Config frequency to rad/us."""
    return float(value) if cfg.get("scheme") == "ideal" else mhz(float(value))


def make_scheme(cfg: dict, splitting: float | None = None) -> AtomicScheme:
    bf = cfg.get("bfield", {})
    if splitting is None:
        if "gauss" in bf:
            split = BFieldConfig.from_gauss(float(bf["gauss"])).splitting
        else:
            split = freq(cfg, bf.get("splitting", 0.0))
    else:
        split = freq(cfg, splitting)
    if split < 0:
        raise ConfigError("bfield", "splitting must be non-negative")
    return build_scheme(cfg["scheme"], BFieldConfig(split))


def make_cavity(cfg: dict, scheme: AtomicScheme, overrides: dict | None = None) -> CavityConfig:
    cav = dict(cfg.get("cavity", {}))
    overrides = overrides or {}
    if "g" in overrides:
        cav.pop("cooperativity", None)
        cav.pop("mode_volume", None)
        cav["g"] = overrides["g"]
    if "kappa" in overrides:
        cav["kappa"] = overrides["kappa"]
    if "kappa" not in cav:
        raise ConfigError("cavity.kappa", "missing")
    kappa = freq(cfg, cav["kappa"])
    if kappa <= 0:
        raise ConfigError("cavity.kappa", "must be positive")
    kw = {"detuning": freq(cfg, cav.get("detuning", 0.0)), "fock_dim": int(cav.get("fock_dim", 3))}
    if "cooperativity" in cav:
        g = sqrt(2 * float(cav["cooperativity"]) * kappa * scheme.gamma)
    elif "mode_volume" in cav:
        line = "D1" if scheme.kind is SchemeKind.RB_D1 else "D2"
        v0, g0 = cav["calibration"]
        g = freq(cfg, coupling_for_mode_volume(float(cav["mode_volume"]), line, (float(v0), float(g0))))
    else:
        g = freq(cfg, cav["g"])
    return CavityConfig.from_transition_coupling(scheme, g, kappa, **kw)


def manifest_units(cfg: dict) -> dict:
    if cfg.get("scheme") == "ideal":
        return {"frequency": "gamma", "time": "1/gamma"}
    return {"frequency": "MHz (x 2pi rad/us)", "time": "us"}


MANIFEST_CONVERSIONS = {"mhz_per_gauss": MHZ_PER_GAUSS}
