"""
simulate: draw a synthetic cohort with ground truth
"""

import argparse
import logging
from pathlib import Path

from app.core.config import settings
from app.models.schemas import SimulationConfig
from app.routers.common import add_config_arguments, flat_config
from app.services.results import ResultsStore
from app.services.simulator import simulate_cohort, simulation_basis

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser("simulate", help="simulate a cohort and its ground truth")
    add_config_arguments(parser)
    parser.add_argument("--n", type=int, help="number of subjects")
    parser.add_argument("--params", help="JSON file of true parameters keyed by parameter path")
    parser.add_argument("--out", help="output directory (default: $JMRMT_OUTPUT_DIR/simulation)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    flat = flat_config(args, n=args.n, seed=args.seed, params_file=args.params)
    config = SimulationConfig.from_flat(flat)
    seed = config.seed if config.seed is not None else settings.SEED

    basis = simulation_basis(config)
    params = ResultsStore.load_parameters(config.params_file, config.sex, n_basis=basis.n_basis)
    result = simulate_cohort(params, config, seed=seed, basis=basis)

    output_dir = Path(args.out) if args.out else ResultsStore.default_output_dir("simulation")
    result.save(output_dir)
    print(f"Simulated {len(result.cohort)} subjects (seed {result.seed}) -> {output_dir}")
    return 0
