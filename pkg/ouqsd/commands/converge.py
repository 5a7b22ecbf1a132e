import argparse

import numpy as np
import pandas as pd
from loguru import logger

from ouqsd.commands.common import EXIT_OK, add_run_arguments, load_run_config, output_path
from ouqsd.core.exceptions import ConfigurationError, EmptyConditioningError
from ouqsd.core.output import write_csv
from ouqsd.services.eigen import build_qsd
from ouqsd.services.oracle import conditional_density_oracle
from ouqsd.services.simulate import conditional_ecdf, ks_distance, simulate_ensemble


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "converge", help="conditioned law per checkpoint: ECDF, oracle density and nu"
    )
    add_run_arguments(parser)
    parser.add_argument("--y-min", type=float, default=0.05, help="first grid point")
    parser.add_argument("--y-max", type=float, default=4.0, help="last grid point")
    parser.add_argument("--ny", type=int, default=80, help="grid size")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    if not 0 < args.y_min < args.y_max or args.ny < 2:
        raise ConfigurationError("need 0 < --y-min < --y-max and --ny >= 2")
    config = load_run_config(args)
    y = np.linspace(args.y_min, args.y_max, args.ny)
    ensemble = simulate_ensemble(config.sim_config())
    dist = build_qsd(
        config.params, config.qsd_rate, tol=config.series_tol, u_max=config.resolved_u_max
    )
    qsd_density = dist.density(y)

    frames = []
    for i, t in enumerate(ensemble.checkpoints):
        table = conditional_density_oracle(
            config.params, config.initial_density, t, y, config.quadrature_spec()
        )
        try:
            ecdf = conditional_ecdf(ensemble, i)
        except EmptyConditioningError as e:
            logger.warning(str(e))
            ecdf_values = np.full(y.shape, np.nan)
        else:
            ecdf_values = ecdf(y)
            distance = ks_distance(ecdf, dist)
            logger.info(f"t={t}: KS distance to nu_{config.qsd_rate} = {distance:.5f}")
        frames.append(
            pd.DataFrame(
                {
                    "t": t,
                    "y": y,
                    "ecdf": ecdf_values,
                    "oracle_density": table.density,
                    "qsd_density": qsd_density,
                }
            )
        )
    frame = pd.concat(frames, ignore_index=True)
    write_csv(frame, output_path(args, config, "conditional.csv"), config.seed)
    return EXIT_OK
