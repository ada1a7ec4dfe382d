"""Batch command-line front end.

Exit codes: 0 success, 2 configuration error, 3 infeasible scenario.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import __version__
from .channel import BelowHorizonError
from .geometry import DegenerateGeometryError
from .precoding import DegenerateChannelError, ZeroForcingInfeasible
from .scenario.config import ConfigError, ScenarioConfig, load_preset, load_scenario, preset_names
from .scenario.report import SweepTable, format_report, read_report
from .scenario.sweeps import (
    UserLinkSystem,
    _meta,
    run_design_table,
    run_feeder_sweep,
    run_spacing_capacity_sweep,
    run_userlink_sweep,
)
from .scheduling import madoc_schedule

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

INFEASIBLE = (ZeroForcingInfeasible, DegenerateChannelError, DegenerateGeometryError, BelowHorizonError)


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", default=argparse.SUPPRESS,
                   help="scenario file, or the name of a bundled preset (%s)" % ", ".join(preset_names()))
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override users.seed")
    g.add_argument("--out", default=argparse.SUPPRESS, help="output file (default: stdout)")
    g.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS, help="output format (default csv)")
    g.add_argument("--paper-scale", action="store_true", default=argparse.SUPPRESS,
                   help="full-size user populations instead of desk-scale ones")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="satmimo", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=f"satmimo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("design-spacing", parents=[common], help="optimal gateway spacing per feeder carrier")
    p.add_argument("--v", type=int, default=1, help="design index v (non-zero, not a multiple of 2)")
    sub.add_parser("capacity-sweep", parents=[common], help="2x2 capacity versus gateway spacing")
    sub.add_parser("feeder-sweep", parents=[common], help="sum rate versus gateway spacing and weather")
    sub.add_parser("userlink-sweep", parents=[common], help="rate per beam versus downlink EIRP")
    p = sub.add_parser("schedule", parents=[common], help="group the user population and list the groups")
    p.add_argument("--payload", choices=("four-reflector", "single-reflector"), default=None,
                   help="payload whose downlink channel drives the grouping (default: modes.payload)")
    p = sub.add_parser("report", parents=[common], help="re-emit a saved table, optionally in another format")
    p.add_argument("input", help="CSV or JSON table written by a sweep command")
    return parser


def _load_config(args) -> ScenarioConfig:
    source = getattr(args, "config", None)
    if source is None:
        cfg = ScenarioConfig()
    elif Path(source).exists():
        cfg = load_scenario(source)
    elif source in preset_names():
        cfg = load_preset(source)
    else:
        raise ConfigError(f"config {source!r} is neither a file nor a bundled preset {preset_names()}")
    seed = getattr(args, "seed", None)
    if seed is not None:
        cfg = dataclasses.replace(cfg, users=dataclasses.replace(cfg.users, seed=seed))
    return cfg


def _schedule_table(cfg: ScenarioConfig, paper_scale: bool, payload: str | None) -> SweepTable:
    n = cfg.users.paper_scale_total if paper_scale else cfg.users.total
    sysm = UserLinkSystem(cfg, n)
    payload = payload or cfg.modes.payload
    h = sysm.h_four if payload == "four-reflector" else sysm.h_single
    groups = madoc_schedule(h, cfg.schedule.epsilon, sysm.z_t, cfg.schedule.seed, ids=sysm.users.ids.tolist())
    rows = [
        (g, grp.size, " ".join(str(i) for i in grp.member_ids), grp.pairwise_max_cos, int(grp.flagged))
        for g, grp in enumerate(groups)
    ]
    meta = _meta(cfg, "schedule", users=n, payload=payload, epsilon=cfg.schedule.epsilon, seed=cfg.users.seed)
    return SweepTable(("group", "size", "member_ids", "max_cos", "flagged"), rows, meta)


def _run(args) -> SweepTable:
    full = bool(getattr(args, "paper_scale", False))
    if args.command == "report":
        return read_report(args.input)
    cfg = _load_config(args)
    if args.command == "design-spacing":
        return run_design_table(cfg, args.v)
    if args.command == "capacity-sweep":
        return run_spacing_capacity_sweep(cfg)
    if args.command == "feeder-sweep":
        return run_feeder_sweep(cfg, paper_scale=full)
    if args.command == "userlink-sweep":
        return run_userlink_sweep(cfg, paper_scale=full)
    if args.command == "schedule":
        return _schedule_table(cfg, full, args.payload)
    raise AssertionError(args.command)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "design-spacing" and (args.v == 0 or args.v % 2 == 0):
        parser.error(f"--v {args.v} gives a keyhole (rank-1) design; use an odd index")
    fmt = getattr(args, "format", "csv")
    try:
        table = _run(args)
    except ConfigError as exc:
        print(f"satmimo: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except INFEASIBLE as exc:
        print(f"satmimo: infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"satmimo: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = format_report(table, fmt)
    out = getattr(args, "out", None)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
