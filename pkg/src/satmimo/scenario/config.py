"""Scenario configuration: typed defaults plus a flat ``key.sub = value`` text format.

Grammar, one statement per line::

    # comment
    [section]            # optional; prefixes following keys with "section."
    key.sub = value      # value parsed as JSON, bare words taken as strings

Unknown keys are rejected with the offending line number.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

__all__ = [
    "ConfigError",
    "SatelliteConfig",
    "GatewayConfig",
    "SatRxConfig",
    "FeederConfig",
    "DownlinkConfig",
    "UsersConfig",
    "LinkConfig",
    "ScheduleConfig",
    "ModesConfig",
    "MonteCarloConfig",
    "CapacitySweepConfig",
    "ScenarioConfig",
    "parse_scenario",
    "load_scenario",
    "load_preset",
    "preset_names",
    "config_hash",
    "config_to_dict",
]


class ConfigError(ValueError):
    """Parse or validation failure in a scenario file."""


@dataclass(frozen=True)
class SatelliteConfig:
    lon_deg: float = -115.0


@dataclass(frozen=True)
class GatewayConfig:
    lat_deg: float = 38.0
    lon_deg: float = -98.0
    orientation_deg: float = 0.0
    spacing_km: float = 40.0
    sweep_km: tuple = (5.0, 100.0, 2.5)
    antenna_gain_dbi: float = 61.4
    power_mimo_dbw: float = 19.0
    power_siso_dbw: float = 22.0
    siso_active: int = 2


@dataclass(frozen=True)
class SatRxConfig:
    spacing_m: float = 3.0
    count: int = 2
    g_over_t_db: float = 26.0
    diameter_m: float = 1.2


@dataclass(frozen=True)
class FeederConfig:
    bands_ghz: tuple = ((42.5, 43.5), (47.2, 50.2))
    block_bandwidth_mhz: float = 500.0
    siso_bandwidth_mhz: float = 250.0
    weather_db: tuple = ((0.0, 0.0), (6.0, 0.0))
    cnr_target_db: float = 24.0


@dataclass(frozen=True)
class DownlinkConfig:
    beams: int = 16
    band_ghz: tuple = (19.7, 20.2)
    eirp_dbw: tuple = (51.0, 53.0, 55.0, 57.0, 59.0, 61.0, 63.0, 65.0)
    g_over_t_db: float = 16.9
    cnr_bc_db: float = 10.0
    ffr_bandwidth_mhz: float = 500.0
    fr4_bandwidth_mhz: float = 125.0
    reflector_diameter_m: float = 2.6
    uca_diameter_m: float = 3.0
    focal_length_m: float = 2.6
    aim_lat_deg: float = 40.0
    aim_lon_deg: float = -118.0
    spacing_deg: float | None = None


@dataclass(frozen=True)
class UsersConfig:
    total: int = 400
    paper_scale_total: int = 4000
    feeder_total: int = 160
    feeder_paper_scale_total: int = 1600
    seed: int = 1
    region: tuple | None = None


@dataclass(frozen=True)
class LinkConfig:
    symbol_rate_mhz: float = 10.0
    rolloff_guard: float = 1.05


@dataclass(frozen=True)
class ScheduleConfig:
    epsilon: float = 0.25
    seed: int = 0


@dataclass(frozen=True)
class ModesConfig:
    uplink: str = "mimo"
    downlink: str = "ffr"
    payload: str = "four-reflector"


@dataclass(frozen=True)
class MonteCarloConfig:
    mi_samples: int = 20000
    mi_seed: int = 7


@dataclass(frozen=True)
class CapacitySweepConfig:
    carrier_ghz: float = 20.0
    rho_gain_db: float = 10.0
    sat_spacing_m: tuple = (6.0, 12.0)
    sweep_km: tuple = (1.0, 200.0, 0.5)
    lat_deg: float = 0.0
    delta_lon_deg: float = 0.0
    orientation_deg: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "default"
    satellite: SatelliteConfig = field(default_factory=SatelliteConfig)
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    sat_rx: SatRxConfig = field(default_factory=SatRxConfig)
    feeder: FeederConfig = field(default_factory=FeederConfig)
    downlink: DownlinkConfig = field(default_factory=DownlinkConfig)
    users: UsersConfig = field(default_factory=UsersConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    modes: ModesConfig = field(default_factory=ModesConfig)
    montecarlo: MonteCarloConfig = field(default_factory=MonteCarloConfig)
    capacity: CapacitySweepConfig = field(default_factory=CapacitySweepConfig)

    @property
    def symbol_period_s(self) -> float:
        return 1.0 / (self.link.symbol_rate_mhz * 1e6)


_ENUMS = {
    ("modes", "uplink"): {"mimo", "siso"},
    ("modes", "downlink"): {"ffr", "fr4"},
    ("modes", "payload"): {"four-reflector", "single-reflector"},
}


def _tupleize(v):
    if isinstance(v, list):
        return tuple(_tupleize(x) for x in v)
    return v


def _coerce(value, default, where: str):
    """Match the parsed value to the type of the default."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float) or default is None and isinstance(value, (int, float)):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if isinstance(default, tuple) or default is None:
        if value is None:
            return None
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        return _tupleize(value)
    raise ConfigError(f"{where}: unsupported value {value!r}")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        if any(ch in text for ch in "[]{}\","):
            raise
        return text


def parse_scenario(text: str, source: str = "<string>") -> ScenarioConfig:
    """Parse scenario text; raise :class:`ConfigError` with line diagnostics."""
    overrides: dict[str, dict] = {}
    top: dict = {}
    section = ""
    sections = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in sections or section == "name":
                raise ConfigError(f"{where}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if section and "." not in key:
            key = f"{section}.{key}"
        try:
            value = _parse_value(val)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{where}: cannot parse value for '{key}': {exc.msg}") from None
        parts = key.split(".")
        if parts == ["name"]:
            top["name"] = _coerce(value, "", f"{where} key 'name'")
            continue
        if len(parts) != 2 or parts[0] not in sections or parts[0] == "name":
            raise ConfigError(f"{where}: unknown key '{key}'")
        sec_cls = sections[parts[0]].default_factory
        sec_fields = {f.name: f for f in dataclasses.fields(sec_cls)}
        if parts[1] not in sec_fields:
            raise ConfigError(f"{where}: unknown key '{key}'")
        default = sec_fields[parts[1]].default
        overrides.setdefault(parts[0], {})[parts[1]] = _coerce(value, default, f"{where} key '{key}'")

    kwargs = dict(top)
    for name, f in sections.items():
        if name == "name":
            continue
        kwargs[name] = f.default_factory(**overrides.get(name, {}))
    cfg = ScenarioConfig(**kwargs)
    validate(cfg)
    return cfg


def _sweep_points_ok(s, label, problems):
    if not (isinstance(s, tuple) and len(s) == 3 and all(isinstance(x, (int, float)) for x in s)):
        problems.append(f"{label} must be [min, max, step]")
        return
    lo, hi, step = s
    if lo > hi:
        problems.append(f"{label}: min {lo} exceeds max {hi}")
    if step <= 0:
        problems.append(f"{label}: step must be positive")
    if lo < 0:
        problems.append(f"{label}: spacing must be non-negative")


def validate(cfg: ScenarioConfig) -> None:
    problems = []
    for (sec, key), allowed in _ENUMS.items():
        v = getattr(getattr(cfg, sec), key)
        if v not in allowed:
            problems.append(f"{sec}.{key} = {v!r} not in {sorted(allowed)}")
    if abs(cfg.gateway.lat_deg) > 90:
        problems.append("gateway.lat_deg outside [-90, 90]")
    _sweep_points_ok(cfg.gateway.sweep_km, "gateway.sweep_km", problems)
    _sweep_points_ok(cfg.capacity.sweep_km, "capacity.sweep_km", problems)
    if cfg.gateway.spacing_km <= 0:
        problems.append("gateway.spacing_km must be positive")
    if cfg.gateway.siso_active not in (1, 2):
        problems.append("gateway.siso_active must be 1 or 2")
    if cfg.sat_rx.count != 2:
        problems.append("sat_rx.count must be 2 for the feeder model")
    if cfg.sat_rx.spacing_m <= 0:
        problems.append("sat_rx.spacing_m must be positive")
    if not cfg.feeder.bands_ghz:
        problems.append("feeder.bands_ghz must be non-empty")
    for band in cfg.feeder.bands_ghz:
        if len(band) != 2 or band[0] >= band[1]:
            problems.append(f"feeder band {band} must be [low, high] with low < high")
    for w in cfg.feeder.weather_db:
        if len(w) != 2 or min(w) < 0:
            problems.append(f"weather case {w} must be two non-negative attenuations")
    if not cfg.feeder.weather_db:
        problems.append("feeder.weather_db must be non-empty")
    if not cfg.downlink.eirp_dbw:
        problems.append("downlink.eirp_dbw must be non-empty")
    if cfg.downlink.beams != 16:
        problems.append("downlink.beams must be 16 (4x4 lattice)")
    if len(cfg.downlink.band_ghz) != 2 or cfg.downlink.band_ghz[0] >= cfg.downlink.band_ghz[1]:
        problems.append("downlink.band_ghz must be [low, high]")
    if cfg.downlink.spacing_deg is not None and cfg.downlink.spacing_deg <= 0:
        problems.append("downlink.spacing_deg must be positive")
    if not cfg.capacity.sat_spacing_m or min(cfg.capacity.sat_spacing_m) <= 0:
        problems.append("capacity.sat_spacing_m must be non-empty and positive")
    for name in ("total", "paper_scale_total", "feeder_total", "feeder_paper_scale_total"):
        if getattr(cfg.users, name) < 0:
            problems.append(f"users.{name} must be non-negative")
    if cfg.users.region is not None and len(cfg.users.region) < 3:
        problems.append("users.region needs at least 3 [lon, lat] vertices")
    if not 0 < cfg.schedule.epsilon < 1:
        problems.append("schedule.epsilon must lie in (0, 1)")
    if cfg.link.symbol_rate_mhz <= 0:
        problems.append("link.symbol_rate_mhz must be positive")
    if cfg.montecarlo.mi_samples < 1000:
        problems.append("montecarlo.mi_samples must be >= 1000")
    if problems:
        raise ConfigError("invalid scenario: " + "; ".join(problems))


def load_scenario(path) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc.strerror}") from None
    return parse_scenario(text, str(p))


def preset_names() -> list:
    root = resources.files("satmimo.scenario") / "presets"
    return sorted(f.name[:-4] for f in root.iterdir() if f.name.endswith(".cfg"))


def load_preset(name: str) -> ScenarioConfig:
    root = resources.files("satmimo.scenario") / "presets"
    f = root / f"{name}.cfg"
    if not f.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {preset_names()}")
    return parse_scenario(f.read_text(), f"preset:{name}")


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return dataclasses.asdict(cfg)


def config_hash(cfg: ScenarioConfig) -> str:
    blob = json.dumps(config_to_dict(cfg), sort_keys=True, default=list)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
