import argparse
from pathlib import Path

from loguru import logger

from ouqsd.commands.common import EXIT_FAILURE, EXIT_OK
from ouqsd.schemas.config import RunConfig
from ouqsd.services.verify import fast_checks, monte_carlo_checks, run_checks


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("verify", help="run the consistency checks")
    parser.add_argument("--config", type=Path, help="JSON run configuration (seed, n_paths)")
    parser.add_argument("--tol", type=float, default=1e-6, help="eigen-relation tolerance")
    parser.add_argument("--monte-carlo", action="store_true", help="add the Monte Carlo suites")
    parser.add_argument("--n-paths", type=int, help="paths per Monte Carlo suite")
    parser.add_argument("--seed", type=int, help="RNG seed")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    if args.config is not None:
        base = RunConfig.from_file(args.config)
    else:
        base = RunConfig(n_paths=1_000_000)
    checks = fast_checks(args.tol)
    if args.monte_carlo:
        n_paths = args.n_paths if args.n_paths is not None else base.n_paths
        seed = args.seed if args.seed is not None else base.seed
        checks += monte_carlo_checks(n_paths, seed)
    report = run_checks(checks)
    if not report.passed:
        logger.error(f"{len(report.failures)} of {len(report.checks)} checks failed")
        return EXIT_FAILURE
    logger.info(f"all {len(report.checks)} checks passed")
    return EXIT_OK
