"""Strict scenario configuration (JSON).

Every section maps onto a dataclass; unknown keys, missing required keys,
wrong types and dangling node references raise :class:`ConfigError` with
a dotted path to the offending entry.
"""
from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Union

from .atmosphere import Aerosol


class ConfigError(ValueError):
    pass


@dataclass
class StationConfig:
    lat_deg: float
    lon_deg: float
    alt_m: float = 0.0


@dataclass
class QlientConfig:
    station: str
    fiber_km: float


@dataclass
class OrbitConfig:
    source: str  # "circular" | "ephemeris"
    path: str | None = None
    alt_km: float | None = None
    inclination_deg: float | None = None
    zenith_station: str | None = None
    raan_deg: float = 0.0
    arg_lat0_deg: float = 0.0
    t0_s: float = -600.0
    t1_s: float = 600.0
    step_s: float = 10.0


@dataclass
class LinkConfig:
    divergence_rad: float = 5e-6
    pointing_error_rad: float = 0.5e-6
    rx_aperture_m: float = 1.0
    wavelength_m: float = 1550e-9
    aerosol: str = "none"
    cal: float = 1.0
    t_atm_zenith: float | None = None


@dataclass
class FiberConfig:
    loss_db_per_km: float = 0.18
    p_coupling: float = 0.81
    p_dephase: float = 0.02
    cal: float = 1.0


@dataclass
class SourceConfig:
    f_qubit_hz: float = 80e6
    p_qubit: float = 8e-3
    p_flip: float = 0.0
    f_epr_hz: float = 80e6
    p_epr: float = 1e-2


@dataclass
class DetectorConfig:
    p_det: float = 0.95
    dark_rate_hz: float = 100.0
    gate_s: float = 100e-12
    p_crosstalk: float = 1e-5


@dataclass
class NodeConfig:
    p_bsm: float = 0.36
    p_transmit: float = 0.81
    t_gate_s: float = 1e-9
    p_coupling: float = 0.81


@dataclass
class EndpointsConfig:
    source: str = field(metadata={"key": "from"})
    target: str = field(metadata={"key": "to"})
    midpoint_alt_km: float | None = None


@dataclass
class BalloonConfig:
    altitude_km: float = 10.0
    separation_km: float = 377.0
    cn2_balloons: float = 1e-17
    cn2_vertical: float = 1e-15
    balloon_aperture_m: float = 0.4
    qonnector_aperture_m: float = 1.0
    t_atm_horizontal: float | None = None
    t_atm_vertical: float | None = None
    cal: float = 1.0


@dataclass
class SweepConfig:
    parameter: str
    values: list[Union[float, str]]


@dataclass
class ThroughputConfig:
    f_source_hz: float = 80e6
    p_source: float = 0.1


@dataclass
class Scenario:
    name: str
    stations: dict[str, StationConfig]
    description: str = ""
    seed: int = 0
    n_trials: int = 10
    n_photons: int = 6000
    n_pairs: int = 650
    mask_deg: float = 20.0
    sifting: bool = False
    workers: int = 1
    qlients: dict[str, QlientConfig] = field(default_factory=dict)
    orbit: OrbitConfig | None = None
    downlink_station: str | None = None
    link: LinkConfig = field(default_factory=LinkConfig)
    fiber: FiberConfig = field(default_factory=FiberConfig)
    source: SourceConfig = field(default_factory=SourceConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    node: NodeConfig = field(default_factory=NodeConfig)
    endpoints: EndpointsConfig | None = None
    balloon: BalloonConfig | None = None
    sweeps: list[SweepConfig] = field(default_factory=list)
    throughput: ThroughputConfig | None = None
    base_dir: Path = field(default=Path("."), metadata={"internal": True})


LINK_SWEEP_PARAMETERS = ("rx_aperture_m", "divergence_rad", "pointing_error_rad", "aerosol",
                         "wavelength_m", "cal", "t_atm_zenith")
BALLOON_SWEEP_PARAMETERS = ("cn2_balloons", "cn2_vertical", "separation_km",
                            "balloon_aperture_m", "qonnector_aperture_m", "t_atm_horizontal")
SWEEP_PARAMETERS = LINK_SWEEP_PARAMETERS + BALLOON_SWEEP_PARAMETERS


# -- generic strict builder ------------------------------------------------------

def _type_name(tp) -> str:
    return getattr(tp, "__name__", str(tp))


def _convert(tp, value, path: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        options = [a for a in args if a is not type(None)]
        errors = []
        for opt in options:
            try:
                return _convert(opt, value, path)
            except ConfigError as exc:
                errors.append(str(exc))
        raise ConfigError(errors[0] if len(errors) == 1 else
                          f"{path}: expected one of {[_type_name(o) for o in options]}, got {value!r}")
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path)
    if origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object, got {type(value).__name__}")
        return {k: _convert(args[1], v, f"{path}.{k}") for k, v in value.items()}
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {type(value).__name__}")
        return [_convert(args[0], v, f"{path}[{i}]") for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: malformed number {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"{path}: unsupported type {_type_name(tp)}")  # pragma: no cover


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    fields = [f for f in dataclasses.fields(cls) if not f.metadata.get("internal")]
    keys = {f.metadata.get("key", f.name): f for f in fields}
    unknown = sorted(set(data) - set(keys))
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {unknown}; allowed {sorted(keys)}")
    missing = [k for k, f in keys.items()
               if k not in data and f.default is dataclasses.MISSING
               and f.default_factory is dataclasses.MISSING]
    if missing:
        raise ConfigError(f"{path}: missing required key(s) {missing}")
    kwargs = {f.name: _convert(hints[f.name], data[k], f"{path}.{k}")
              for k, f in keys.items() if k in data}
    return cls(**kwargs)


# -- semantic validation -------------------------------------------------------

def _check_range(value, lo, hi, path):
    if value is not None and not lo <= value <= hi:
        raise ConfigError(f"{path}: {value} outside [{lo}, {hi}]")


def validate(s: Scenario) -> Scenario:
    if not s.stations:
        raise ConfigError("scenario.stations: at least one station is required")
    for name, st in s.stations.items():
        _check_range(st.lat_deg, -90, 90, f"scenario.stations.{name}.lat_deg")
        _check_range(st.lon_deg, -180, 180, f"scenario.stations.{name}.lon_deg")
    for name, q in s.qlients.items():
        if q.station not in s.stations:
            raise ConfigError(f"scenario.qlients.{name}.station: unknown station '{q.station}'")
        if q.fiber_km < 0:
            raise ConfigError(f"scenario.qlients.{name}.fiber_km: must be >= 0")
    if s.downlink_station is not None and s.downlink_station not in s.stations:
        raise ConfigError(f"scenario.downlink_station: unknown station '{s.downlink_station}'")
    for key in ("n_trials", "n_photons", "n_pairs", "workers"):
        if getattr(s, key) < 1:
            raise ConfigError(f"scenario.{key}: must be >= 1")
    if not 0 <= s.seed < 2**64:
        raise ConfigError("scenario.seed: must be an unsigned 64-bit integer")
    _check_range(s.mask_deg, -90, 90, "scenario.mask_deg")
    if s.orbit is not None:
        o = s.orbit
        if o.source == "ephemeris":
            if not o.path:
                raise ConfigError("scenario.orbit.path: required for source 'ephemeris'")
        elif o.source == "circular":
            for key in ("alt_km", "inclination_deg"):
                if getattr(o, key) is None:
                    raise ConfigError(f"scenario.orbit.{key}: required for source 'circular'")
            if o.alt_km <= 0:
                raise ConfigError("scenario.orbit.alt_km: must be > 0")
            if o.zenith_station is not None and o.zenith_station not in s.stations:
                raise ConfigError(f"scenario.orbit.zenith_station: unknown station '{o.zenith_station}'")
            if o.t1_s <= o.t0_s or o.step_s <= 0:
                raise ConfigError("scenario.orbit: need t1_s > t0_s and step_s > 0")
        else:
            raise ConfigError(f"scenario.orbit.source: expected 'circular' or 'ephemeris', got '{o.source}'")
    try:
        Aerosol(s.link.aerosol)
    except ValueError:
        raise ConfigError(f"scenario.link.aerosol: unknown aerosol model '{s.link.aerosol}'") from None
    for key in ("divergence_rad", "rx_aperture_m", "wavelength_m"):
        if getattr(s.link, key) <= 0:
            raise ConfigError(f"scenario.link.{key}: must be > 0")
    for sec_name in ("fiber", "source", "detector", "node"):
        sec = getattr(s, sec_name)
        for f in dataclasses.fields(sec):
            if f.name.startswith("p_"):
                _check_range(getattr(sec, f.name), 0.0, 1.0, f"scenario.{sec_name}.{f.name}")
    _check_range(s.link.t_atm_zenith, 0.0, 1.0, "scenario.link.t_atm_zenith")
    if s.endpoints is not None:
        for key, name in (("from", s.endpoints.source), ("to", s.endpoints.target)):
            if name not in s.qlients:
                raise ConfigError(f"scenario.endpoints.{key}: unknown qlient '{name}'")
    for i, sw in enumerate(s.sweeps):
        path = f"scenario.sweeps[{i}]"
        if sw.parameter not in SWEEP_PARAMETERS:
            raise ConfigError(f"{path}.parameter: unknown sweep parameter '{sw.parameter}'; "
                              f"allowed {list(SWEEP_PARAMETERS)}")
        if not sw.values:
            raise ConfigError(f"{path}.values: must not be empty")
        for j, v in enumerate(sw.values):
            if sw.parameter == "aerosol":
                try:
                    Aerosol(v)
                except ValueError:
                    raise ConfigError(f"{path}.values[{j}]: unknown aerosol model {v!r}") from None
            elif isinstance(v, str):
                raise ConfigError(f"{path}.values[{j}]: malformed number {v!r}")
    return s


# -- entry points --------------------------------------------------------------

def preset_names() -> list[str]:
    root = resources.files("qcitysim").joinpath("presets")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def preset_path(name: str) -> Path:
    return Path(str(resources.files("qcitysim").joinpath("presets", f"{name}.json")))


def scenario_from_dict(data: Any, base_dir: Path | str = ".") -> Scenario:
    s = _build(Scenario, data, "scenario")
    s.base_dir = Path(base_dir)
    return validate(s)


def parse_scenario(path: str | Path) -> Scenario:
    """Load a scenario file, or a shipped preset when ``path`` names one."""
    p = Path(path)
    if not p.exists() and str(path) in preset_names():
        p = preset_path(str(path))
    try:
        text = p.read_text("utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from None
    if not text.strip():
        data: Any = {}
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(data, p.parent)
