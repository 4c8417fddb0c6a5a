"""
fit: run the MCMC chains of the JM-RMT model or the LOCF baseline
"""

import argparse
import logging
from pathlib import Path

from tabulate import tabulate

from app.core.exceptions import ConvergenceError
from app.models.schemas import FitConfig
from app.routers.common import add_config_arguments, flat_config
from app.services.cohort_service import CohortService
from app.services.diagnostics import failing_parameters
from app.services.locf import fit_locf
from app.services.results import ResultsStore
from app.services.sampler import run_fit

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser("fit", help="fit a model to a cohort CSV")
    parser.add_argument("cohort", help="cohort CSV")
    parser.add_argument("--model", choices=["jmrmt", "locf"], default=None, help="model (default jmrmt)")
    parser.add_argument("--sex", choices=["Men", "Women"], help="fit one sex only")
    add_config_arguments(parser)
    parser.add_argument("--jobs", type=int, help="worker processes for parallel chains")
    parser.add_argument("--strict", action="store_true", help="exit 3 when any R-hat reaches the threshold")
    parser.add_argument("--out", help="output directory (default: $JMRMT_OUTPUT_DIR/fit_<model>)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    flat = flat_config(args, model=args.model, seed=args.seed, sex=args.sex, strict=args.strict or None)
    config = FitConfig.from_flat(flat)
    cohort_path = Path(args.cohort)
    cohort = CohortService.load_cohort(cohort_path, label=cohort_path.stem, sex=config.sex)

    model = config.options.model
    output_dir = Path(args.out) if args.out else ResultsStore.default_output_dir(f"fit_{model}")
    if model == "locf":
        result = fit_locf(cohort, config, output_dir=output_dir, jobs=args.jobs, quiet=args.quiet)
    else:
        result = run_fit(cohort, config, output_dir=output_dir, jobs=args.jobs, quiet=args.quiet)

    if not args.quiet:
        rows = [[name, f"{r['mean']:.4g}", f"{r['sd']:.4g}", f"{r['q025']:.4g}", f"{r['q975']:.4g}",
                 f"{r['rhat']:.3f}" if r["rhat"] == r["rhat"] else "-"]
                for name, r in result.summary.iterrows()]
        print(tabulate(rows, headers=["Parameter", "Mean", "SD", "2.5%", "97.5%", "R-hat"], tablefmt="grid"))
        print(f"Results written to {output_dir}")

    if config.strict and not result.fit_summary.converged:
        if not result.rhat:
            raise ConvergenceError("R-hat unavailable: --strict needs at least two chains")
        failing = failing_parameters(result.rhat, config.rhat_threshold)
        raise ConvergenceError(f"{len(failing)} parameter(s) with R-hat >= {config.rhat_threshold}", failing)
    return 0
