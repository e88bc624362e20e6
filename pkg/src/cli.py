"""
swe-femlab command-line driver.

Usage:
    python -m src.cli steady --config steady.cfg --t-end 2 --seed 7
    python -m src.cli kelvin-converge --edge-lengths 0.4,0.2,0.1 --threads 3 --no-deterministic
    python -m src.cli spectrum --domain file --mesh-file two_disks.msh

Every ExperimentConfig field has a flag (--edge-length, --ro, ...). Flags beat
SWE_FEMLAB_* environment variables, which beat the --config file, which beats
the built-in per-experiment defaults.

Exit codes: 0 success, 1 config error, 2 acceptance breach, 3 numerical failure.
"""

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

import structlog

from src.config import (
    BOOL_KEYS, EXPERIMENTS, ExperimentConfig, load_experiment_config,
)
from src.errors import EXIT_NUMERICAL, EXIT_OK, AcceptanceError, ConfigError, SweFemlabError
from src.experiments.commands import COMMANDS

logger = structlog.get_logger("cli")

GLOBAL_FLAGS = ("output_dir", "seed", "threads", "deterministic")

DESCRIPTIONS = {
    "balance": "Balanced velocity from a Gaussian streamfunction; divergence norm",
    "steady": "Step random balanced states; fail if they drift",
    "kelvin-circular": "Kelvin wave around a circular basin",
    "kelvin-converge": "Channel Kelvin wave refinement ladder; fail on low slopes",
    "spectrum": "P2 Laplacian spectrum; fail unless exactly one near-zero mode",
}


def configure_logging(verbose: bool = False) -> None:
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.dev.ConsoleRenderer(),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            logging.DEBUG if verbose else logging.INFO),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


class CliParser(argparse.ArgumentParser):
    """Usage errors raise ConfigError (exit 1) instead of argparse's exit 2."""

    def error(self, message: str):
        raise ConfigError(f"{self.prog}: {message}")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Flat key = value config file")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")

    globals_ = parser.add_argument_group("global")
    experiment = parser.add_argument_group("experiment")
    for f in fields(ExperimentConfig):
        if f.name == "experiment":
            continue
        group = globals_ if f.name in GLOBAL_FLAGS else experiment
        if f.name in BOOL_KEYS:
            group.add_argument(_flag(f.name), dest=f.name, action=argparse.BooleanOptionalAction,
                               default=None)
        else:
            group.add_argument(_flag(f.name), dest=f.name, default=None, metavar="VALUE")


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(
        prog="swe-femlab",
        description="P1DG-P2 linear rotating shallow-water experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        _add_config_flags(sub.add_parser(name, help=DESCRIPTIONS[name],
                                         description=DESCRIPTIONS[name]))
    return parser


def print_summary(result: dict, failed: str | None = None) -> None:
    print(f"\n{'=' * 60}")
    print(f"{result['experiment'].upper()} {'FAILED' if failed else 'OK'}")
    print(f"{'=' * 60}")
    for key, value in result.get("summary", {}).items():
        if isinstance(value, float):
            value = f"{value:.6g}"
        print(f"  {key:<34} {value}")
    for note in result.get("errors", []):
        print(f"  note: {note}")
    if failed:
        print(f"  reason: {failed}")
    if result.get("outputs"):
        print(f"  outputs: {len(result['outputs'])} file(s) in {Path(result['outputs'][0]).parent}")


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    configure_logging(args.verbose)

    overrides = {f.name: getattr(args, f.name) for f in fields(ExperimentConfig)
                 if f.name != "experiment"}
    try:
        config = load_experiment_config(args.command, path=args.config, overrides=overrides)
        result = COMMANDS[args.command](config)
    except AcceptanceError as e:
        logger.error("acceptance_failed", command=args.command, reason=str(e))
        if e.result:
            print_summary(e.result, failed=str(e))
        return e.exit_code
    except SweFemlabError as e:
        logger.error("command_failed", command=args.command, error=str(e),
                     kind=type(e).__name__)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception:
        logger.exception("unexpected_error", command=args.command)
        return EXIT_NUMERICAL

    print_summary(result)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
