import argparse
import sys
from typing import Optional, Sequence

from loguru import logger
from pydantic import ValidationError

from ouqsd import __version__
from ouqsd.commands import converge, decay, qsd, simulate, verify
from ouqsd.commands.common import EXIT_CONFIG, EXIT_FAILURE
from ouqsd.core.config import settings
from ouqsd.core.exceptions import ConfigurationError, DomainError, OuqsdError
from ouqsd.core.logging import setup_logging


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ouqsd",
        description="Quasi-stationary limits of the absorbed Ornstein-Uhlenbeck process",
    )
    parser.add_argument("--version", action="version", version=f"ouqsd {__version__}")
    parser.add_argument("--log-level", default=settings.log_level, help="loguru level")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Register subcommands
    for command in (qsd, simulate, converge, decay, verify):
        command.register(subparsers)
    return parser


def run_command(argv: Optional[Sequence[str]] = None) -> int:
    """Parse argv, run one subcommand and return its exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse has already written usage to stderr
        return e.code if isinstance(e.code, int) else EXIT_CONFIG

    try:
        setup_logging(args.log_level)
    except ValueError as e:
        print(f"ouqsd: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return args.handler(args)
    except (ConfigurationError, DomainError, ValidationError) as e:
        logger.error(f"configuration error: {e}")
        return EXIT_CONFIG
    except OuqsdError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_FAILURE


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
