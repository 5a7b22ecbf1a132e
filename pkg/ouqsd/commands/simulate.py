import argparse

import pandas as pd

from ouqsd.commands.common import EXIT_OK, add_run_arguments, load_run_config, output_path
from ouqsd.core.output import write_csv
from ouqsd.services.oracle import survival_curve_oracle
from ouqsd.services.simulate import simulate_ensemble


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "simulate", help="Monte Carlo survival curve against the quadrature oracle"
    )
    add_run_arguments(parser)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    ensemble = simulate_ensemble(config.sim_config())
    oracle = survival_curve_oracle(
        config.params, config.initial_density, config.checkpoints, config.quadrature_spec()
    )
    frame = pd.DataFrame(
        {
            "t": list(ensemble.checkpoints),
            "p_mc": [ensemble.survival_fraction(i) for i in range(len(ensemble.checkpoints))],
            "se_mc": [ensemble.standard_error(i) for i in range(len(ensemble.checkpoints))],
            "p_oracle": [p for _, p in oracle],
        }
    )
    write_csv(frame, output_path(args, config, "survival.csv"), config.seed)
    return EXIT_OK
