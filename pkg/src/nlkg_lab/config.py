"""Run configuration: YAML schema, presets, validation, content hash.

Schema (all keys optional except where a preset supplies them)::

    potential:    {preset: poschl_teller, depth: 2.0, width: 1.0}
    m:            1.25
    grid:         {L: 40.0, N: 2048}
    nonlinearity: {preset: power, p: 4, coefficient: 1.0}
                  # or {derivatives: {4: 24.0, 6: 0.0}}  (beta^(j)(0))
    normal_form:  {r: null, D_jet: null}
    fgr:          {scan: {values: [...], mu: null}}
    dynamics:     {mode: both, eps: 0.05, amplitudes: [1.0], T: 100.0, dt: 0.01,
                   sample_dt: 0.1, sponge: auto, random_phase: false,
                   reduced_model: {omega: 0.5, p: 3, gamma: 1.0, y0: 1.0}}
    tolerances:   {tol_res: 1.0e-9, tol_edge: null, fgr_methods: 0.02, density_agreement: 0.05}
    output:       {dir: runs/default}
    seed:         0
"""

from __future__ import annotations

import copy
import hashlib
import json
from typing import Any, Dict, Optional

import yaml

from .errors import ConfigurationError

DEFAULTS: Dict[str, Any] = {
    "potential": {"preset": "poschl_teller", "depth": 2.0, "width": 1.0},
    "m": 1.25,
    "grid": {"L": 40.0, "N": 2048},
    "nonlinearity": {"preset": "power", "p": 4, "coefficient": 1.0},
    "normal_form": {"r": None, "D_jet": None},
    "fgr": {"scan": None},
    "dynamics": {
        "mode": "both", "eps": 0.05, "amplitudes": [1.0], "T": 100.0, "dt": 0.01, "sample_dt": 0.1,
        "sponge": "auto", "random_phase": False, "reduced_model": None,
    },
    "tolerances": {"tol_res": 1e-9, "tol_edge": None, "fgr_methods": 0.02, "density_agreement": 0.05},
    "output": {"dir": "runs/default"},
    "seed": 0,
}

PRESETS: Dict[str, Dict[str, Any]] = {
    # no bound states at all
    "free": {"potential": {"preset": "zero"}, "m": 1.0, "grid": {"L": 40.0, "N": 2048}},
    # one mode, omega = 0.75, 2 omega > m
    "pt-single": {"potential": {"preset": "poschl_teller", "depth": 2.0}, "m": 1.25},
    # one mode, omega = 0.4, first resonance at 3 omega
    "pt-slow": {"potential": {"preset": "poschl_teller", "depth": 2.0}, "m": 1.16 ** 0.5,
                "grid": {"L": 40.0, "N": 1024}},
    # two modes
    "pt-two-mode": {"potential": {"preset": "poschl_teller", "depth": 6.0}, "m": 2.5,
                    "grid": {"L": 30.0, "N": 1024}},
    # m = 2 omega exactly
    # the grid shifts omega by ~1e-6 relative, so the resonance test needs a looser tolerance
    "resonant": {"potential": {"preset": "poschl_teller", "depth": 2.0}, "m": (4.0 / 3.0) ** 0.5,
                 "grid": {"L": 40.0, "N": 1024}, "tolerances": {"tol_res": 1e-5}},
    "zero-beta": {"nonlinearity": {"preset": "zero"}},
    "reduced-single": {"dynamics": {"mode": "reduced", "T": 1.0,
                                    "reduced_model": {"omega": 0.5, "p": 3, "gamma": 1.0, "y0": 1.0}}},
}

_SECTIONS = set(DEFAULTS)


def deep_merge(base: dict, over: Optional[dict]) -> dict:
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and not _switches_kind(out[k], v):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _switches_kind(old: dict, new: dict) -> bool:
    """A section naming a different preset (or switching to explicit derivatives) replaces the old one."""
    if "derivatives" in new and "derivatives" not in old:
        return True
    return "preset" in new and "preset" in old and new["preset"] != old["preset"]


def load_config(path: Optional[str] = None, preset: Optional[str] = None, overrides: Optional[dict] = None) -> dict:
    """Resolve defaults <- preset <- file <- overrides and validate."""
    cfg = copy.deepcopy(DEFAULTS)
    if preset:
        if preset not in PRESETS:
            raise ConfigurationError(f"unknown preset {preset!r}; available: {sorted(PRESETS)}")
        cfg = deep_merge(cfg, PRESETS[preset])
    if path:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"config {path} is not valid YAML: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigurationError(f"config {path}: top level must be a mapping")
        if "preset" in data:
            name = data.pop("preset")
            if name not in PRESETS:
                raise ConfigurationError(f"config {path}: unknown preset {name!r}")
            cfg = deep_merge(cfg, PRESETS[name])
        cfg = deep_merge(cfg, data)
    cfg = deep_merge(cfg, overrides)
    validate(cfg)
    return cfg


def _num(cfg, dotted, positive=False, integer=False, allow_none=False):
    cur = cfg
    for part in dotted.split("."):
        cur = cur.get(part) if isinstance(cur, dict) else None
    if cur is None and allow_none:
        return
    if isinstance(cur, bool) or not isinstance(cur, (int, float)):
        raise ConfigurationError(f"config key '{dotted}' must be a number (got {cur!r})")
    if integer and int(cur) != cur:
        raise ConfigurationError(f"config key '{dotted}' must be an integer (got {cur!r})")
    if positive and cur <= 0:
        raise ConfigurationError(f"config key '{dotted}' must be positive (got {cur!r})")


def validate(cfg: dict) -> None:
    unknown = set(cfg) - _SECTIONS
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    _num(cfg, "m", positive=True)
    _num(cfg, "grid.L", positive=True)
    _num(cfg, "grid.N", positive=True, integer=True)
    if cfg["grid"]["N"] < 16:
        raise ConfigurationError("config key 'grid.N' must be at least 16")
    if "preset" not in cfg["potential"]:
        raise ConfigurationError("config key 'potential.preset' is required")
    for key in cfg["potential"]:
        if key != "preset":
            _num(cfg, f"potential.{key}")
    nl = cfg["nonlinearity"]
    if "derivatives" not in nl and "preset" not in nl:
        raise ConfigurationError("config key 'nonlinearity' needs 'preset' or 'derivatives'")
    if "derivatives" in nl:
        t = nl["derivatives"]
        if not isinstance(t, dict):
            raise ConfigurationError("config key 'nonlinearity.derivatives' must map order -> value")
        for k in t:
            if int(k) < 4 and not nl.get("allow_cubic"):
                raise ConfigurationError(
                    f"nonlinearity.derivatives has order {k} < 4; beta must vanish to fourth order "
                    "(set nonlinearity.allow_cubic: true for exploratory scans)"
                )
    _num(cfg, "normal_form.r", integer=True, allow_none=True)
    _num(cfg, "normal_form.D_jet", integer=True, allow_none=True)
    d = cfg["dynamics"]
    if d["mode"] not in ("pde", "reduced", "both"):
        raise ConfigurationError(f"dynamics.mode must be pde, reduced or both (got {d['mode']!r})")
    for key in ("eps", "T", "dt", "sample_dt"):
        _num(cfg, f"dynamics.{key}", positive=True)
    if not (d["sponge"] in ("auto", None, False) or isinstance(d["sponge"], (int, float))):
        raise ConfigurationError("dynamics.sponge must be 'auto', false/null or a damping rate")
    for key in ("tol_res", "fgr_methods", "density_agreement"):
        _num(cfg, f"tolerances.{key}", positive=True)
    _num(cfg, "tolerances.tol_edge", positive=True, allow_none=True)
    _num(cfg, "seed", integer=True)
    scan = cfg["fgr"].get("scan")
    if scan is not None and (not isinstance(scan, dict) or not scan.get("values")):
        raise ConfigurationError("fgr.scan must be a mapping with a non-empty 'values' list")


def config_hash(cfg: dict) -> str:
    """SHA-256 over the canonical JSON form of the resolved configuration."""
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def set_dotted(cfg: dict, dotted: str, value) -> dict:
    out = copy.deepcopy(cfg)
    cur = out
    parts = dotted.split(".")
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
    cur[parts[-1]] = value
    return out
