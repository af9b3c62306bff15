#!/usr/bin/env python3

import argparse
import logging
import sys
from pathlib import Path
from typing import List, NoReturn, Optional

from core.config_manager import apply_overrides, load_problem, load_settings, merge_epsilon, reset_settings, save_settings
from core.errors import HandsOffError, UsageError
from core.models import ConfigStatus
from ui.presenters import EXIT_ERROR, ReportPresenter, error_json, write_outputs

LOG_FORMAT = "[%(levelname)s - %(filename)s:%(lineno)s] %(message)s"

SUBCOMMANDS = ("solve", "oracle", "compare", "graph", "validate", "simulate")

logger = logging.getLogger("handsoff")


class CommandParser(argparse.ArgumentParser):
    """Reports bad arguments as a USAGE_ERROR instead of exiting with code 2."""

    def error(self, message: str) -> NoReturn:
        raise UsageError("USAGE_ERROR", message)


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else (logging.WARNING if quiet else logging.INFO)
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "handsoff", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler.handsoff = True  # type: ignore[attr-defined]
    root.addHandler(handler)
    root.setLevel(level)


def build_parser() -> argparse.ArgumentParser:
    parser = CommandParser(
        prog="handsoff",
        description="Maximum hands-off control of discrete-time switched linear systems",
    )
    parser.add_argument("command", choices=SUBCOMMANDS, help="What to run")
    parser.add_argument("config", help="Problem config (JSON)")
    parser.add_argument("--out", default=".", help="Directory for report files (default: current directory)")
    parser.add_argument("--format", dest="fmt", choices=("dot", "json"), default="dot", help="Graph export format")
    parser.add_argument("--seed", type=int, help="Seed for sampled validation")
    parser.add_argument("--samples", type=int, help="Random samples per region (default: 200)")
    parser.add_argument("--cap", type=int, help="Walk enumeration cap (default: 100000)")
    parser.add_argument("--budget", type=int, help="Oracle budget on N^T (default: 1000000)")
    parser.add_argument("--jobs", type=int, help="Worker threads for the oracle (default: 1)")
    parser.add_argument("--nu", type=int, nargs="+", help="Switching sequence for simulate (1-based)")
    parser.add_argument("--mu", type=float, nargs="+", help="Continuous controls for simulate")
    stored = parser.add_mutually_exclusive_group()
    stored.add_argument("--save-settings", action="store_true", help="Store the effective run settings for later runs")
    stored.add_argument("--reset-settings", action="store_true", help="Remove stored run settings before running")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("--quiet", action="store_true", help="Only warnings and errors")
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        configure_logging(args.verbose, args.quiet)

        config = load_problem(args.config)
        if args.reset_settings:
            settings, status = reset_settings()
            if status is ConfigStatus.ERROR:
                logger.warning("Stored settings could not be removed")
        else:
            settings, status = load_settings()
            if status is ConfigStatus.ERROR:
                logger.warning("Stored settings could not be read; using defaults")
        settings = apply_overrides(settings, {
            "seed": args.seed,
            "samples": args.samples,
            "cap": args.cap,
            "budget": args.budget,
            "jobs": args.jobs,
        })
        if args.save_settings:
            message, status = save_settings(settings)
            if status is ConfigStatus.ERROR:
                logger.warning(message)
            else:
                logger.info(message)
        settings = merge_epsilon(settings, config)
        presenter = ReportPresenter(config, settings, Path(args.config).stem)

        if args.command == "solve":
            output = presenter.present_solve()
        elif args.command == "oracle":
            output = presenter.present_oracle()
        elif args.command == "compare":
            output = presenter.present_compare()
        elif args.command == "graph":
            output = presenter.present_graph(args.fmt)
        elif args.command == "validate":
            output = presenter.present_validate()
        else:
            if not args.nu or not args.mu:
                raise UsageError("USAGE_ERROR", "simulate needs --nu and --mu")
            output = presenter.present_simulate(args.nu, args.mu)

        write_outputs(output, Path(args.out))
        sys.stdout.write(output.stdout)
        return output.exit_code
    except HandsOffError as e:
        sys.stderr.write(error_json(e.to_dict()) + "\n")
        return EXIT_ERROR


def main():
    """Main entry point for the hands-off solver."""
    sys.exit(run())


if __name__ == "__main__":
    main()
