"""Command line interface.

    misslin simulate --config fig1-lda-mcar [--seed N] [--out results.csv]
                     [--no-timing] [--set key=value ...]
    misslin bounds --grid bias-default [--out bounds.csv] [--strict]
    misslin separability --grid separability-default [--out sep.csv] [--strict]
    misslin presets list

Exit codes: 0 success, 2 configuration error, 3 bound violation under --strict.
"""

from __future__ import annotations

import argparse
import sys

from .experiment import (
    BUILTIN_CONFIGS,
    BUILTIN_GRIDS,
    ConfigError,
    apply_overrides,
    load_config,
    load_grid,
    load_separability_grid,
    results_to_csv,
    rows_to_csv,
    run_bounds_sweep,
    run_experiment,
    run_separability_sweep,
)
from .generators import PRESET_NAMES

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VIOLATION = 3


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    overrides = dict(kv.split("=", 1) for kv in args.set)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.preset is not None:
        overrides["preset"] = args.preset
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    rows = run_experiment(cfg)
    _write(results_to_csv(rows, include_timing=not args.no_timing), args.out or cfg.out)
    return EXIT_OK


def _cmd_bounds(args) -> int:
    grid = load_grid(args.grid)
    if args.seed is not None:
        from dataclasses import replace

        grid = replace(grid, seed=args.seed)
    rows, columns = run_bounds_sweep(grid)
    _write(rows_to_csv(rows, columns), args.out)
    if args.strict and any(row["pass"] == "false" for row in rows):
        return EXIT_VIOLATION
    return EXIT_OK


def _cmd_separability(args) -> int:
    grid = load_separability_grid(args.grid)
    if args.seed is not None:
        from dataclasses import replace

        grid = replace(grid, seed=args.seed)
    rows, columns = run_separability_sweep(grid)
    _write(rows_to_csv(rows, columns), args.out)
    if args.strict and any(
        row["lower_ok"] == "false" or row["upper_ok"] == "false" for row in rows
    ):
        return EXIT_VIOLATION
    return EXIT_OK


def _cmd_presets(args) -> int:
    if args.action != "list":
        raise ConfigError(f"unknown presets action {args.action!r}")
    print("model presets:")
    for name in PRESET_NAMES:
        print(f"  {name}")
    print("experiment configs:")
    for name in sorted(BUILTIN_CONFIGS):
        print(f"  {name}")
    print("bound grids:")
    for name in sorted(BUILTIN_GRIDS) + ["separability-default"]:
        print(f"  {name}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="misslin",
        description="Linear classification with missing data: simulations and bound checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the excess-risk simulation for a config")
    sim.add_argument("--config", required=True, help="builtin name or key=value file")
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--preset", default=None, help="model preset name (fig1-lda, fig1-logistic)")
    sim.add_argument("--out", default=None, help="CSV path (stdout when omitted)")
    sim.add_argument(
        "--no-timing", action="store_true", help="omit the wall_time_ms column (byte-stable output)"
    )
    sim.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key"
    )
    sim.set_defaults(func=_cmd_simulate)

    bounds = sub.add_parser("bounds", help="evaluate bias/estimation bounds over a grid")
    bounds.add_argument("--grid", required=True)
    bounds.add_argument("--out", default=None)
    bounds.add_argument("--seed", type=int, default=None)
    bounds.add_argument("--strict", action="store_true", help="exit 3 on any failed inequality")
    bounds.set_defaults(func=_cmd_bounds)

    sep = sub.add_parser("separability", help="Monte Carlo separability sweep")
    sep.add_argument("--grid", required=True)
    sep.add_argument("--out", default=None)
    sep.add_argument("--seed", type=int, default=None)
    sep.add_argument("--strict", action="store_true")
    sep.set_defaults(func=_cmd_separability)

    presets = sub.add_parser("presets", help="list named presets, configs and grids")
    presets.add_argument("action", choices=["list"])
    presets.set_defaults(func=_cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
