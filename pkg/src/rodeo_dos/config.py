"""Run configuration: a TOML document with strict keys and documented defaults.

Minimal file::

    model.spins = 5
    model.J = 1.0
    model.B = 0.0

Everything else falls back to the defaults in :data:`DEFAULTS`, which
reproduce the reference B = 0 scan (one ancilla, tau = 0, d = 20, 500 rounds,
grid [-6, 5] with step 0.1, first-order Trotter with delta = 0.1).
"""
from __future__ import annotations

import copy
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .evolution import TrotterConfig
from .hamiltonian import TfimParams
from .rodeo import EnergyGrid, RodeoParams


class ConfigError(ValueError):
    """Malformed or invalid configuration (exit code 2)."""


DEFAULTS: dict[str, dict[str, Any] | Any] = {
    "model": {"spins": None, "J": 1.0, "B": 0.0, "periodic": True},
    "rodeo": {
        "ancillas": 1,
        "rounds": 500,
        "tau": 0.0,
        "dev": 20.0,
        "seed": 0,
        "readout": "expectation",
        "shots": 1000,
        "convention": "sequential",
    },
    "grid": {"start": -6.0, "end": 5.0, "step": 0.1},
    "trotter": {"order": 1, "delta": 0.1, "max_steps": 5000, "mode": "exact"},
    "refine": {"start": -1.4, "end": -0.6, "step": 0.005, "dev": 200.0},
    "thermo": {
        "t_min": 0.05,
        "t_max": 10.0,
        "points": 200,
        "imag": 0.0,
        "clamp": True,
        "compare_t_min": 0.2,
        "compare_t_max": 10.0,
        "tolerance": 0.01,
        "escalate_rounds": 2000,
    },
    "validate": {"cells": 20, "mc_samples": 10000},
    "output": {"dir": "rodeo_out", "per_input": False},
    "workers": 1,
}

_TYPES = {bool: (bool,), int: (int,), float: (int, float), str: (str,)}
_KIND = {
    ("model", "spins"): int,
    ("rodeo", "seed"): int,
}


@dataclass(frozen=True)
class ThermoSpec:
    t_min: float = 0.05
    t_max: float = 10.0
    points: int = 200
    imag: float = 0.0
    clamp: bool = True
    compare_t_min: float = 0.2
    compare_t_max: float = 10.0
    tolerance: float = 0.01
    escalate_rounds: int = 2000

    def __post_init__(self):
        if not 0 < self.t_min < self.t_max:
            raise ValueError("thermo temperatures need 0 < t_min < t_max")
        if self.points < 2:
            raise ValueError("thermo.points must be >= 2")


@dataclass(frozen=True)
class RefineSpec:
    start: float = -1.4
    end: float = -0.6
    step: float = 0.005
    dev: float = 200.0


@dataclass(frozen=True)
class RunConfig:
    model: TfimParams
    rodeo: RodeoParams
    grid: EnergyGrid
    trotter: TrotterConfig
    thermo: ThermoSpec = field(default_factory=ThermoSpec)
    refine: RefineSpec = field(default_factory=RefineSpec)
    validate_cells: int = 20
    validate_mc_samples: int = 10000
    output: Path = Path("rodeo_out")
    per_input: bool = False
    workers: int = 1
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def to_dict(self) -> dict:
        """Fully resolved document; feeding it back reproduces this config."""
        return copy.deepcopy(self.raw)


def _merge(doc: dict) -> dict:
    merged = copy.deepcopy(DEFAULTS)
    for key, value in doc.items():
        if key not in merged:
            raise ConfigError(f"unknown key '{key}'")
        if isinstance(merged[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"'{key}' must be a table")
            for sub, v in value.items():
                if sub not in merged[key]:
                    raise ConfigError(f"unknown key '{key}.{sub}'")
                merged[key][sub] = v
        else:
            merged[key] = value
    return merged


def _check_types(merged: dict) -> None:
    for section, values in merged.items():
        if not isinstance(values, dict):
            default = DEFAULTS[section]
            if not isinstance(values, _TYPES[type(default)]) or isinstance(values, bool) != isinstance(default, bool):
                raise ConfigError(f"'{section}' must be {type(default).__name__}")
            continue
        for key, v in values.items():
            default = DEFAULTS[section][key]
            kind = _KIND.get((section, key), type(default))
            if v is None:
                raise ConfigError(f"'{section}.{key}' is required")
            ok = isinstance(v, _TYPES[kind]) and (isinstance(v, bool) == (kind is bool))
            if not ok:
                raise ConfigError(f"'{section}.{key}' must be {kind.__name__}, got {v!r}")


def build_config(doc: dict) -> RunConfig:
    """Validate a parsed document (TOML tables or a manifest's config)."""
    merged = _merge(doc)
    _check_types(merged)
    m, r, g, t, th = (merged[k] for k in ("model", "rodeo", "grid", "trotter", "thermo"))

    def make(section, factory, **kwargs):
        try:
            return factory(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"{section}: {exc}") from None

    if r["readout"] not in ("expectation", "shots"):
        raise ConfigError("rodeo: readout must be 'expectation' or 'shots'")
    model = make("model", TfimParams, spins=m["spins"], J=float(m["J"]), B=float(m["B"]),
                 periodic=m["periodic"])
    rodeo = make(
        "rodeo", RodeoParams,
        ancillas=r["ancillas"], rounds=r["rounds"], tau=float(r["tau"]), dev=float(r["dev"]),
        seed=r["seed"], shots=r["shots"] if r["readout"] == "shots" else None,
        convention=r["convention"],
    )
    grid = make("grid", EnergyGrid, start=float(g["start"]), end=float(g["end"]),
                step=float(g["step"]))
    trotter = make("trotter", TrotterConfig, order=t["order"], delta=float(t["delta"]),
                   max_steps=t["max_steps"], mode=t["mode"])
    thermo = make("thermo", ThermoSpec, **{k: (float(v) if isinstance(v, int) and
                                               isinstance(DEFAULTS["thermo"][k], float) else v)
                                           for k, v in th.items()})
    rf = merged["refine"]
    refine = RefineSpec(**{k: float(v) for k, v in rf.items()})
    make("refine", EnergyGrid, start=refine.start, end=refine.end, step=refine.step)
    if not refine.dev > 0:
        raise ConfigError("refine: dev must be positive")
    if merged["workers"] < 0:
        raise ConfigError("workers must be >= 0")
    val = merged["validate"]
    if val["cells"] < 1 or val["mc_samples"] < 2:
        raise ConfigError("validate: need cells >= 1 and mc_samples >= 2")
    return RunConfig(
        model, rodeo, grid, trotter, thermo, refine,
        val["cells"], val["mc_samples"],
        Path(merged["output"]["dir"]), merged["output"]["per_input"],
        merged["workers"], merged,
    )


def parse_config(source: str) -> RunConfig:
    """Parse TOML text into a validated :class:`RunConfig`."""
    try:
        doc = tomllib.loads(source)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from None
    return build_config(doc)


def load_config(path: str | Path) -> RunConfig:
    """Read a TOML config, or a JSON run manifest carrying a ``config`` entry."""
    text = Path(path).read_text(encoding="utf-8")
    if str(path).endswith(".json"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"parse error: {exc}") from None
        return build_config(doc.get("config", doc))
    return parse_config(text)


def with_overrides(config: RunConfig, **overrides) -> RunConfig:
    """Return a new config with dotted-key overrides, e.g. ``{"rodeo.seed": 3}``.

    ``None`` values are ignored.
    """
    doc = config.to_dict()
    for key, value in overrides.items():
        if value is None:
            continue
        if "." in key:
            section, sub = key.split(".", 1)
            doc.setdefault(section, {})[sub] = value
        else:
            doc[key] = value
    return build_config(doc)


def env_seed() -> int | None:
    """Seed from ``RODEO_SEED``, used when no ``--seed`` flag is given."""
    raw = os.environ.get("RODEO_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"RODEO_SEED must be an integer, got {raw!r}") from None
