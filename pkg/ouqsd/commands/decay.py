import argparse
import math

import numpy as np
import pandas as pd
from loguru import logger

from ouqsd.commands.common import EXIT_OK, add_run_arguments, load_run_config, output_path
from ouqsd.core.exceptions import ConfigurationError
from ouqsd.core.output import write_csv
from ouqsd.services.oracle import survival_curve_oracle
from ouqsd.services.simulate import decay_rate

DEFAULT_WINDOW = (6.0, 10.0)
# oracle times spread over the fit window
WINDOW_POINTS = 5


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("decay", help="fitted decay rates of the oracle survival curve")
    add_run_arguments(parser)
    parser.add_argument(
        "--window",
        type=float,
        nargs=2,
        default=list(DEFAULT_WINDOW),
        metavar=("T_LO", "T_HI"),
        help="time window of the main fit",
    )
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    t_lo, t_hi = args.window
    if not 0 < t_lo < t_hi:
        raise ConfigurationError(f"--window needs 0 < T_LO < T_HI, got {t_lo} {t_hi}")
    config = load_run_config(args)
    checkpoints = list(config.checkpoints)
    times = np.union1d(np.linspace(t_lo, t_hi, WINDOW_POINTS), checkpoints)
    curve = survival_curve_oracle(
        config.params, config.initial_density, times, config.quadrature_spec()
    )
    windows = [(t_lo, t_hi)] + list(zip(checkpoints, checkpoints[1:]))
    target = config.target_rate if config.target_rate is not None else math.nan
    rows = []
    for lo, hi in windows:
        rate = decay_rate(curve, (lo, hi))
        rows.append({"t_lo": lo, "t_hi": hi, "lambda_hat": rate, "target": target})
    frame = pd.DataFrame(rows, columns=["t_lo", "t_hi", "lambda_hat", "target"])
    logger.info(f"decay rate over [{t_lo}, {t_hi}]: {frame.lambda_hat.iloc[0]:.6f}")
    write_csv(frame, output_path(args, config, "decay.csv"), config.seed)
    return EXIT_OK
