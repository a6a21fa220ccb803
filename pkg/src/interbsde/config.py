"""Experiment configuration: a YAML (or JSON) document with one section per module.

Example::

    schema_version: 1
    seed: 11
    measure:  {family: uniform, n: 8}           # or {atoms: [[0.0], [1.0]], weights: [0.5, 0.5]}
    driver:   {family: attraction, params: {kappa: 0.5}}
    terminal: {family: identity}
    grid:     {horizon: 1.0, n_steps: 64}
    paths: 2048
    solver:   {tolerance: 1.0e-6, max_iterations: 50, degree: 3, ridge: 1.0e-8}
    verify:   {lipschitz_trials: 1000, u1: [0.3], u2: [0.4], deltas: [0.2, 0.1, 0.05]}
    study:    {n_list: [8, 16, 32], reference_n: 64, probes: [0.1, 0.5, 0.9]}
    output:   {dir: out, max_paths: 64}
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .driver import DRIVER_FAMILIES, DriverSpec
from .measure import DiscreteMeasure, InvalidMeasureError, MeasureFamily, UnsupportedFamilyError, quantize
from .solver import SolverConfig
from .stochastic import TERMINAL_FAMILIES, TerminalField, TimeGrid

SCHEMA_VERSION = 1

DEFAULTS: dict[str, Any] = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "measure": {"family": "uniform", "n": 8, "method": "quantile", "dim": 1, "params": {}},
    "driver": {"family": "attraction", "params": {"kappa": 0.5}, "lipschitz": None},
    "terminal": {"family": "identity", "params": {}, "lipschitz": None},
    "grid": {"horizon": 1.0, "n_steps": 64},
    "paths": 2048,
    "solver": {"tolerance": 1e-6, "max_iterations": 50, "degree": 3, "ridge": 1e-8},
    "verify": {"lipschitz_trials": 1000, "u1": None, "u2": None, "deltas": [0.2, 0.1, 0.05],
               "uniqueness_y_tol": 1e-3, "uniqueness_z_tol": 5e-3, "identity_tol": 1e-8,
               "scaling_band": [3.0, 5.3]},
    "study": {"n_list": [8, 16, 32], "reference_n": 64, "probes": [0.1, 0.5, 0.9]},
    "output": {"dir": "out", "max_paths": 64},
}


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _merge(base: dict, override: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        name = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(name, "unknown key")
        if isinstance(base[key], dict) and key != "params":
            if not isinstance(value, dict):
                raise ConfigError(name, "expected a mapping")
            if key == "measure" and "atoms" in value:
                out[key] = copy.deepcopy(value)
                continue
            out[key] = _merge(base[key], value, name + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class ExperimentConfig:
    raw: dict
    mu0: DiscreteMeasure
    family: MeasureFamily | None
    driver: DriverSpec
    terminal: TerminalField
    grid: TimeGrid
    paths: int
    seed: int
    solver: SolverConfig

    @property
    def sha256(self) -> str:
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    @property
    def dim(self) -> int:
        return self.mu0.dim

    @property
    def verify(self) -> dict:
        return self.raw["verify"]

    @property
    def study(self) -> dict:
        return self.raw["study"]

    @property
    def output(self) -> dict:
        return self.raw["output"]


def _positive_int(value, field, minimum=1):
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(field, f"expected an integer >= {minimum}, got {value!r}")
    return value


def _number(value, field):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field, f"expected a number, got {value!r}")
    return float(value)


def build(doc: dict, seed: int | None = None) -> ExperimentConfig:
    """Validate a parsed document and build every model object, before any computation."""
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a mapping")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version!r}")
    raw = _merge(DEFAULTS, doc)
    if seed is not None:
        raw["seed"] = seed
    seed_value = _positive_int(raw["seed"], "seed", minimum=0)

    m = raw["measure"]
    family = None
    try:
        if "atoms" in m:
            mu0 = DiscreteMeasure.from_dict(m)
        else:
            family = MeasureFamily(m.get("family", "uniform"), _positive_int(m.get("dim", 1), "measure.dim"),
                                   m.get("method", "quantile"), dict(m.get("params") or {}))
            mu0 = quantize(family, _positive_int(m.get("n"), "measure.n"), seed_value)
    except UnsupportedFamilyError as exc:
        raise ConfigError("measure.family", str(exc)) from None
    except (InvalidMeasureError, TypeError) as exc:
        raise ConfigError("measure", str(exc)) from None
    except ValueError as exc:
        raise ConfigError("measure", str(exc)) from None

    drv = raw["driver"]
    if drv["family"] not in DRIVER_FAMILIES:
        raise ConfigError("driver.family", f"unknown family {drv['family']!r}")
    if drv["lipschitz"] is not None:
        _number(drv["lipschitz"], "driver.lipschitz")
    for key, value in (drv["params"] or {}).items():
        _number(value, f"driver.params.{key}")
    driver = DriverSpec(drv["family"], dict(drv["params"] or {}), drv["lipschitz"])

    term = raw["terminal"]
    if term["family"] not in TERMINAL_FAMILIES:
        raise ConfigError("terminal.family", f"unknown family {term['family']!r}")
    for key, value in (term["params"] or {}).items():
        _number(value, f"terminal.params.{key}")
    terminal = TerminalField(term["family"], dict(term["params"] or {}), term["lipschitz"])

    horizon = _number(raw["grid"]["horizon"], "grid.horizon")
    if horizon <= 0:
        raise ConfigError("grid.horizon", "must be positive")
    grid = TimeGrid(horizon, _positive_int(raw["grid"]["n_steps"], "grid.n_steps"))
    paths = _positive_int(raw["paths"], "paths")

    s = raw["solver"]
    try:
        solver = SolverConfig(_number(s["tolerance"], "solver.tolerance"),
                              _positive_int(s["max_iterations"], "solver.max_iterations"),
                              _positive_int(s["degree"], "solver.degree"),
                              _number(s["ridge"], "solver.ridge"))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("solver", str(exc)) from None

    st = raw["study"]
    n_list = st["n_list"]
    if not isinstance(n_list, list) or not n_list:
        raise ConfigError("study.n_list", "expected a nonempty list")
    for i, n in enumerate(n_list):
        _positive_int(n, f"study.n_list[{i}]")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError("study.n_list", "must be strictly ascending")
    ref = _positive_int(st["reference_n"], "study.reference_n")
    if ref < n_list[-1]:
        raise ConfigError("study.reference_n", "must be at least the largest N")

    out = raw["output"]
    if out["max_paths"] is not None:
        _positive_int(out["max_paths"], "output.max_paths")

    v = raw["verify"]
    _positive_int(v["lipschitz_trials"], "verify.lipschitz_trials")
    for key in ("u1", "u2"):
        if v[key] is not None and len(v[key]) != mu0.dim:
            raise ConfigError(f"verify.{key}", f"expected a point of dimension {mu0.dim}")

    return ExperimentConfig(raw, mu0, family, driver, terminal, grid, paths, seed_value, solver)


def load(path: str | Path, seed: int | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not a valid YAML/JSON document: {exc}") from None
    return build(doc or {}, seed)
