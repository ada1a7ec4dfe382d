"""Scenario configuration, user synthesis, experiment sweeps and reports."""

from .config import ConfigError, ScenarioConfig, load_preset, load_scenario, parse_scenario
from .report import SweepTable, emit_report, read_report
from .sweeps import run_feeder_sweep, run_spacing_capacity_sweep, run_userlink_sweep, uplink_cnr_db
from .users import Region, generate_users

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "load_preset",
    "load_scenario",
    "parse_scenario",
    "SweepTable",
    "emit_report",
    "read_report",
    "run_feeder_sweep",
    "run_spacing_capacity_sweep",
    "run_userlink_sweep",
    "uplink_cnr_db",
    "Region",
    "generate_users",
]
