"""YAML configuration for the command-line driver.

One file (or several, merged left to right) holds every parameter. Unknown
keys are rejected so typos do not silently fall back to defaults. Schema,
with defaults::

    seed: 0                    # master seed for noise, trackers and the GA
    workers: 1
    method: risk               # risk | ttc | distance
    variant: plain             # plain | hysteresis | hysteresis_jpdaf
    gate: 0.75                 # warning-to-object association radius [m]
    suite:       {seed: 1, per_kind: 4, duration_range: [10, 30], speed_range: [0.5, 2.0]}
    risk:        {risk_threshold, horizon_s_max, interval_ds, escape_rate,
                  event_duration_dt, cross_section,
                  uncertainty: {sigma0, growth_long, growth_lat}}
    ttc:         {distance_threshold, time_threshold}
    distance:    {distance_threshold, fov_half_angle}
    hysteresis:  {n_on, n_off}
    tracker:     {particle_count, process_noise_pos, ..., birth_velocity_std}
    ideal:       {lead_time, enter_radius, exit_radius}
    noise:       {sigmas: [...], ps: [...], repeats: 30,
                  methods: [risk, ttc, distance], variants: [plain, hysteresis]}
    ga:          {population_size, generations, ..., seed}
    tune:        {include_uncertainty: false, include_hysteresis: false}
    correlate:   {n_samples: 500}
    generate:    {sigmas: [], p: 0.0, repeats: 1}
    overrides:   {"<method>/<variant>": {<flat parameter>: value}}

``overrides`` carries per-(method, variant) values such as the ones written
by ``riskwarn tune``; flat names are those of the parameter dataclasses
(``risk_threshold``, ``sigma0``, ``n_on``, ...).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import yaml

from .baselines import DistanceParams, TtcParams
from .experiment import apply_values
from .oracle import IdealRules
from .pipeline import METHODS, RunConfig, canonical_variant
from .postprocess import HysteresisParams
from .predict import UncertaintyParams
from .risk import RiskParams
from .tracking import TrackerParams
from .tune import GaConfig


class ConfigError(ValueError):
    pass


DEFAULT_SIGMAS = [0.0, 0.05, 0.1, 0.2, 0.3, 0.5]
DEFAULT_PS = [0.0, 0.01, 0.02, 0.05, 0.1, 0.2]

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "workers": 1,
    "method": "risk",
    "variant": "plain",
    "gate": 0.75,
    "suite": {"seed": 1, "per_kind": 4, "duration_range": [10.0, 30.0], "speed_range": [0.5, 2.0]},
    "risk": {},
    "ttc": {},
    "distance": {},
    "hysteresis": {},
    "tracker": {},
    "ideal": {},
    "noise": {"sigmas": DEFAULT_SIGMAS, "ps": DEFAULT_PS, "repeats": 30,
              "methods": list(METHODS), "variants": ["plain", "hysteresis"]},
    "ga": {},
    "tune": {"include_uncertainty": False, "include_hysteresis": False},
    "correlate": {"n_samples": 500},
    "generate": {"sigmas": [], "p": 0.0, "repeats": 1},
    "overrides": {},
}

_DATACLASS_SECTIONS = {"ttc": TtcParams, "distance": DistanceParams, "hysteresis": HysteresisParams,
                       "tracker": TrackerParams, "ideal": IdealRules, "ga": GaConfig}


def merge(base: Mapping, update: Mapping) -> dict:
    """Recursive dict merge; ``update`` wins, nested mappings are merged."""
    out = copy.deepcopy(dict(base))
    for k, v in update.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(paths: Sequence[str | Path] = (), overrides: Mapping | None = None) -> dict:
    """Defaults, then each YAML file in order, then ``overrides``."""
    cfg = copy.deepcopy(DEFAULTS)
    for p in paths:
        try:
            text = Path(p).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc.strerror or exc}") from exc
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {p}: {exc}") from exc
        if not isinstance(data, Mapping):
            raise ConfigError(f"config {p} must be a mapping at top level")
        cfg = merge(cfg, data)
    if overrides:
        cfg = merge(cfg, {k: v for k, v in overrides.items() if v is not None})
    unknown = set(cfg) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return cfg


def _build(cls, section: str, values: Mapping):
    if not isinstance(values, Mapping):
        raise ConfigError(f"section {section!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    bad = set(values) - known
    if bad:
        raise ConfigError(f"unknown keys in {section!r}: {', '.join(sorted(bad))}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {section!r}: {exc}") from exc


def _risk_params(values: Mapping) -> RiskParams:
    values = dict(values)
    unc = _build(UncertaintyParams, "risk.uncertainty", values.pop("uncertainty", {}) or {})
    known = {f.name for f in fields(RiskParams)} - {"uncertainty"}
    bad = set(values) - known
    if bad:
        raise ConfigError(f"unknown keys in 'risk': {', '.join(sorted(bad))}")
    try:
        return RiskParams(uncertainty=unc, **values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid 'risk': {exc}") from exc


def run_config(cfg: Mapping, method: str | None = None, variant: str | None = None) -> RunConfig:
    """:class:`RunConfig` for ``method``/``variant`` with any matching override."""
    method = method or cfg["method"]
    try:
        variant = canonical_variant(variant or cfg["variant"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
    parts = {k: _build(cls, k, cfg.get(k) or {}) for k, cls in _DATACLASS_SECTIONS.items() if k != "ga"}
    try:
        rc = RunConfig(method=method, variant=variant, risk=_risk_params(cfg.get("risk") or {}),
                       gate=float(cfg["gate"]), seed=int(cfg["seed"]), **parts)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    values = (cfg.get("overrides") or {}).get(f"{method}/{variant}")
    if values:
        try:
            rc = apply_values(rc, values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid override {method}/{variant}: {exc}") from exc
    return rc


def ga_config(cfg: Mapping) -> GaConfig:
    ga = dict(cfg.get("ga") or {})
    ga.setdefault("seed", int(cfg["seed"]))
    return _build(GaConfig, "ga", ga)


@dataclass(frozen=True)
class SuiteSpec:
    seed: int = 1
    per_kind: int = 4
    duration_range: tuple = (10.0, 30.0)
    speed_range: tuple = (0.5, 2.0)


def suite_spec(cfg: Mapping) -> SuiteSpec:
    s = _build(SuiteSpec, "suite", cfg.get("suite") or {})
    return replace(s, duration_range=tuple(s.duration_range), speed_range=tuple(s.speed_range))
