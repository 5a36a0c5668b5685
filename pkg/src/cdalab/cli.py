"""Command-line entry point.

Subcommands: run (single experiment), sweep (Cartesian parameter sweeps),
presets (show built-in configurations), validate (check a config file).
Exit codes: 0 success, 1 validation failure, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import PRESETS, parse_config, run_and_emit
from .errors import ConfigurationError


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", help="path to a TOML experiment config")
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--emit-plots", action="store_true", help="write SVG error plots")
    parser.add_argument(
        "--allow-failures",
        action="store_true",
        help="exit 0 even if a sweep point blows up",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdalab",
        description="Twin-experiment comparisons of nudging and the ensemble "
        "Kalman filter on chaotic spectral PDE solvers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a config with no sweep block")
    _add_run_flags(p_run)

    p_sweep = sub.add_parser("sweep", help="execute every sweep point of a config")
    _add_run_flags(p_sweep)

    sub.add_parser("presets", help="list built-in presets")

    p_val = sub.add_parser("validate", help="parse and validate a config file")
    p_val.add_argument("config")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "presets":
        for name, preset in PRESETS.items():
            print(f"[{name}]")
            print(json.dumps(preset, indent=2, sort_keys=True))
        return 0

    try:
        cfg = parse_config(args.config)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    if args.command == "validate":
        print(f"{args.config}: ok")
        print(json.dumps(cfg.raw, indent=2, sort_keys=True, default=str))
        return 0

    if args.command == "run" and cfg.sweep:
        print(
            "config error: sweep: config contains a sweep block; use `cdalab sweep`",
            file=sys.stderr,
        )
        return 1

    try:
        return run_and_emit(
            cfg,
            out_dir=args.out,
            master_seed=args.seed,
            emit_plots=args.emit_plots or None,
            allow_failures=args.allow_failures,
        )
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
