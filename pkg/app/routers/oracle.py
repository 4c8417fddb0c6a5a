"""
oracle: per-subject observed-data log-likelihood by exhaustive enumeration
"""

import argparse
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from app.core.exceptions import ResultsError
from app.models.schemas import ModelOptions
from app.services.cohort_service import CohortService
from app.services.oracle import observed_loglik
from app.services.results import ResultsStore
from app.services.sampler import build_spec

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser("oracle", help="enumerate augmentations of small subjects")
    parser.add_argument("cohort", help="cohort CSV")
    parser.add_argument("--params", required=True, help="JSON parameter file keyed by parameter path")
    parser.add_argument("--sex", choices=["Men", "Women"], default="Men", help="defaults for missing keys")
    parser.add_argument("--random-effects", help="CSV with id, true_b0, true_b1 (default b = 0)")
    parser.add_argument("--out", help="output CSV (default: $JMRMT_OUTPUT_DIR/oracle.csv)")
    parser.set_defaults(handler=run)


def read_random_effects(path: Path) -> dict:
    frame = pd.read_csv(path, dtype={"id": str})
    missing = {"id", "true_b0", "true_b1"} - set(frame.columns)
    if missing:
        raise ResultsError(f"{path}: missing columns {sorted(missing)}")
    first = frame.drop_duplicates("id")
    return {row.id: np.array([row.true_b0, row.true_b1], dtype=float) for row in first.itertuples()}


def run(args: argparse.Namespace) -> int:
    cohort_path = Path(args.cohort)
    cohort = CohortService.load_cohort(cohort_path, label=cohort_path.stem)
    spec = build_spec(cohort, ModelOptions())
    params = ResultsStore.load_parameters(Path(args.params), args.sex, n_basis=spec.basis.n_basis)
    effects = read_random_effects(Path(args.random_effects)) if args.random_effects else {}

    rows = []
    for subject in cohort:
        b = effects.get(subject.id, np.zeros(2))
        rows.append({"id": subject.id, "observed_loglik": observed_loglik(params, spec, subject, b)})
    frame = pd.DataFrame(rows, columns=["id", "observed_loglik"])

    output = Path(args.out) if args.out else ResultsStore.default_output_dir("oracle.csv")
    ResultsStore.write_frame(frame, output)
    logger.info(f"Oracle log-likelihoods for {len(frame)} subjects written to {output}")
    if not args.quiet:
        print(f"Total observed log-likelihood {frame['observed_loglik'].sum():.6f} ({len(frame)} subjects) -> {output}")
    return 0
