"""Arguments and helpers shared by the subcommands."""

import argparse
from pathlib import Path
from typing import Dict, Optional

from loguru import logger

from ouqsd.schemas.config import RunConfig

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

# flag dest -> RunConfig field (by alias)
_OVERRIDES = {
    "a": "a",
    "eta": "eta",
    "family": "family",
    "x_m": "x_m",
    "lambda_": "lambda",
    "checkpoints": "checkpoints",
    "n_paths": "n_paths",
    "seed": "seed",
    "dg_step": "dg_step",
    "quad_tol": "quad_tol",
    "series_tol": "series_tol",
    "u_max": "u_max",
    "output_dir": "output_dir",
}


def add_run_arguments(parser: argparse.ArgumentParser) -> None:
    """Flags mirroring RunConfig; each one overrides the --config file"""
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--a", type=float, help="drift rate")
    parser.add_argument("--eta", type=float, help="tail exponent of the initial density")
    parser.add_argument(
        "--family", choices=["pareto", "log_pareto"], help="initial density family"
    )
    parser.add_argument("--x-m", dest="x_m", type=float, help="left end of the initial support")
    parser.add_argument("--lambda", dest="lambda_", type=float, help="QSD rate, default a*eta")
    parser.add_argument("--checkpoints", type=float, nargs="+", help="observation times")
    parser.add_argument("--n-paths", type=int, help="Monte Carlo paths")
    parser.add_argument("--seed", type=int, help="RNG seed")
    parser.add_argument("--dg-step", type=float, help="grid spacing in transformed time")
    parser.add_argument("--quad-tol", type=float, help="absolute quadrature tolerance")
    parser.add_argument("--series-tol", type=float, help="relative series truncation")
    parser.add_argument("--u-max", type=float, help="validated range of the eigenfunction series")
    parser.add_argument("--output-dir", type=Path, help="directory for default output names")
    parser.add_argument("--out", type=Path, help="output CSV path")


def overrides(args: argparse.Namespace) -> Dict[str, object]:
    return {
        field: getattr(args, dest)
        for dest, field in _OVERRIDES.items()
        if getattr(args, dest, None) is not None
    }


def load_run_config(args: argparse.Namespace) -> RunConfig:
    values = overrides(args)
    if args.config is not None:
        config = RunConfig.from_file(args.config, **values)
    else:
        config = RunConfig.model_validate(values)
    if config.exploratory:
        logger.warning(f"eta={config.eta} is exploratory: no target rate")
    return config


def output_path(args: argparse.Namespace, config: RunConfig, default_name: str) -> Path:
    out: Optional[Path] = args.out
    return out if out is not None else config.output_dir / default_name
