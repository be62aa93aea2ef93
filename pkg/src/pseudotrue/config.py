"""TOML study configuration: parsing, validation and canonical re-emission.

Sections (all optional): ``[study]``, ``[schedules]``, ``[rate]``, ``[fixed_index]``,
``[filmer]``, ``[network]`` with ``[network.layer_weights]``. Unknown keys are errors, so
typos never silently fall back to defaults. An annotated example lives in
``demos/configs/``.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import tomlkit

from .design import PowerSchedule
from .environments.filmer import FilmerParams
from .environments.fixed_index import FixedIndexParams
from .environments.household_network import HouseholdNetworkConfig
from .errors import ConfigurationError
from .montecarlo import StudyConfig

__all__ = ["RateSettings", "RunConfig", "load_config", "parse_config", "config_to_toml", "config_hash", "filmer_defaults", "with_overrides", "DEFAULT_GRID"]

_STUDY_KEYS = ("environment", "pi", "r", "n", "n_grid", "reps", "seed", "workers", "population_size")
DEFAULT_GRID = (500, 1000, 2000, 4000, 8000)


@dataclass(frozen=True)
class RateSettings:
    kappa: float = 0.49
    alpha: float = 0.40
    scale: float = 0.75

    def __post_init__(self) -> None:
        if not 0 < self.kappa < 1 or not 0 < self.alpha < 0.5:
            raise ConfigurationError("rate exponents need 0 < kappa < 1 and 0 < alpha < 1/2")
        if self.scale <= 0:
            raise ConfigurationError("rate schedule scale must be positive")


@dataclass(frozen=True)
class RunConfig:
    study: StudyConfig = field(default_factory=StudyConfig)
    rate: RateSettings = field(default_factory=RateSettings)


def filmer_defaults() -> StudyConfig:
    """Structural study defaults: 2000 sampled households, six PCs, h = 0.15."""
    return StudyConfig(environment="filmer", n=2000, r=6, h=PowerSchedule(0.15, 0.0), reps=200)


def _section(data: Mapping, name: str) -> dict:
    sec = data.get(name, {})
    if not isinstance(sec, Mapping):
        raise ConfigurationError(f"[{name}] must be a table")
    return {str(k): _plain(v) for k, v in sec.items()}


def _plain(v: Any) -> Any:
    """Strip tomlkit wrappers down to builtin types."""
    if isinstance(v, Mapping):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_plain(x) for x in v]
    if isinstance(v, bool):
        return bool(v)
    if isinstance(v, int):
        return int(v)
    if isinstance(v, float):
        return float(v)
    if isinstance(v, str):
        return str(v)
    return v


def _check_keys(section: str, got: Mapping, allowed) -> None:
    extra = sorted(set(got) - set(allowed))
    if extra:
        raise ConfigurationError(f"unknown key(s) in [{section}]: {', '.join(extra)}")


def _build(cls, section: str, values: dict, base=None):
    names = [f.name for f in fields(cls)]
    _check_keys(section, values, names)
    kwargs = {}
    for f in fields(cls):
        if f.name in values:
            v = values[f.name]
            kwargs[f.name] = tuple(v) if isinstance(v, list) else v
    try:
        return replace(base, **kwargs) if base is not None else cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"[{section}]: {exc}") from exc


def parse_config(data: Mapping) -> RunConfig:
    """Build a :class:`RunConfig` from a parsed TOML document."""
    _check_keys("top level", data, ("study", "schedules", "rate", "fixed_index", "filmer", "network"))
    study = _section(data, "study")
    _check_keys("study", study, _STUDY_KEYS)
    base = filmer_defaults() if study.get("environment") == "filmer" else StudyConfig()

    sched = _section(data, "schedules")
    _check_keys("schedules", sched, ("h_scale", "h_exponent", "rho_scale", "rho_exponent"))
    h = PowerSchedule(float(sched.get("h_scale", base.h.scale)), float(sched.get("h_exponent", base.h.exponent)))
    rho = None
    if "rho_scale" in sched:
        rho = PowerSchedule(float(sched["rho_scale"]), float(sched.get("rho_exponent", 0.0)))
    elif "rho_exponent" in sched:
        raise ConfigurationError("[schedules] rho_exponent needs rho_scale")

    fixed = _build(FixedIndexParams, "fixed_index", _section(data, "fixed_index"))
    filmer = _build(FilmerParams, "filmer", _section(data, "filmer"))
    net_values = _section(data, "network")
    if "layer_weights" in net_values:
        lw = dict(HouseholdNetworkConfig().layer_weights)
        lw.update({k: float(v) for k, v in net_values["layer_weights"].items()})
        net_values["layer_weights"] = lw
    network = _build(HouseholdNetworkConfig, "network", net_values)

    kwargs = {k: study[k] for k in _STUDY_KEYS if k in study}
    if "n_grid" in kwargs:
        kwargs["n_grid"] = tuple(int(v) for v in kwargs["n_grid"])
    try:
        cfg = replace(base, h=h, rho=rho, fixed_index=fixed, filmer=filmer, network=network, **kwargs)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc

    rate_values = _section(data, "rate")
    rate = _build(RateSettings, "rate", rate_values)
    return RunConfig(cfg, rate)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc.strerror or exc}") from exc
    try:
        doc = tomlkit.parse(text)
    except Exception as exc:  # tomlkit raises several parse error types
        raise ConfigurationError(f"config file {path} is not valid TOML: {exc}") from exc
    return parse_config(doc)


def _as_toml_values(obj) -> dict:
    out = {}
    for f in fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, tuple):
            v = list(v)
        out[f.name] = v
    return out


def config_to_toml(run: RunConfig) -> str:
    """Canonical TOML text; parsing it gives back an identical :class:`RunConfig`."""
    s = run.study
    doc = tomlkit.document()
    study = tomlkit.table()
    for k in _STUDY_KEYS:
        v = getattr(s, k)
        study[k] = list(v) if isinstance(v, tuple) else v
    doc["study"] = study
    sched = tomlkit.table()
    sched["h_scale"] = float(s.h.scale)
    sched["h_exponent"] = float(s.h.exponent)
    if s.rho is not None:
        sched["rho_scale"] = float(s.rho.scale)
        sched["rho_exponent"] = float(s.rho.exponent)
    doc["schedules"] = sched
    doc["rate"] = _as_toml_values(run.rate)
    doc["fixed_index"] = _as_toml_values(s.fixed_index)
    doc["filmer"] = _as_toml_values(s.filmer)
    doc["network"] = _as_toml_values(s.network)
    return tomlkit.dumps(doc)


def config_hash(run: RunConfig) -> str:
    return hashlib.sha256(config_to_toml(run).encode("utf-8")).hexdigest()


def with_overrides(run: RunConfig, **overrides) -> RunConfig:
    """Apply CLI overrides (``None`` means keep)."""
    study_kw = {k: v for k, v in overrides.items() if v is not None and k in {f.name for f in dataclasses.fields(StudyConfig)}}
    study = replace(run.study, **study_kw) if study_kw else run.study
    if overrides.get("network_rho") is not None:
        study = replace(study, network=replace(study.network, rho=float(overrides["network_rho"])))
    rate_kw = {k: overrides[k] for k in ("kappa", "alpha") if overrides.get(k) is not None}
    rate = replace(run.rate, **rate_kw) if rate_kw else run.rate
    return RunConfig(study, rate)
