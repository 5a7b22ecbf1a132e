import argparse
import math

import numpy as np
import pandas as pd

from ouqsd.commands.common import EXIT_OK, add_run_arguments, load_run_config, output_path
from ouqsd.core.exceptions import ConfigurationError
from ouqsd.core.output import write_csv
from ouqsd.services.eigen import build_qsd


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("qsd", help="tabulate the density and CDF of nu_lambda")
    add_run_arguments(parser)
    parser.add_argument("--du", type=float, default=0.01, help="table spacing")
    parser.set_defaults(handler=handle)


def qsd_table(config, du: float) -> pd.DataFrame:
    if not du > 0:
        raise ConfigurationError(f"--du must be positive, got {du}")
    u_max = config.resolved_u_max
    dist = build_qsd(config.params, config.qsd_rate, tol=config.series_tol, u_max=u_max)
    y = du * np.arange(math.floor(u_max / du + 1e-9) + 1)
    return pd.DataFrame({"y": y, "density": dist.density(y), "cdf": dist.cdf(y)})


def handle(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    write_csv(qsd_table(config, args.du), output_path(args, config, "qsd.csv"), config.seed)
    return EXIT_OK
