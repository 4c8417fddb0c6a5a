"""
compare: hazard exceedance and medication-years report for a JM-RMT / LOCF fit pair
"""

import argparse
import logging
from pathlib import Path

from tabulate import tabulate

from app.services.cohort_service import CohortService
from app.services.compare import compare_fits
from app.services.results import ResultsStore

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser("compare", help="compare a JM-RMT fit with an LOCF fit")
    parser.add_argument("jmrmt_dir", help="fit directory of the JM-RMT model")
    parser.add_argument("locf_dir", help="fit directory of the LOCF baseline")
    parser.add_argument("cohort", help="cohort CSV both fits were run on")
    parser.add_argument("--sex", choices=["Men", "Women"], help="restrict the cohort as the fits did")
    parser.add_argument("--out", help="output directory (default: $JMRMT_OUTPUT_DIR/compare)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    cohort_path = Path(args.cohort)
    cohort = CohortService.load_cohort(cohort_path, label=cohort_path.stem, sex=args.sex)
    jmrmt = ResultsStore.load_fit(Path(args.jmrmt_dir))
    locf = ResultsStore.load_fit(Path(args.locf_dir))
    report = compare_fits(jmrmt, locf, cohort)

    output_dir = Path(args.out) if args.out else ResultsStore.default_output_dir("compare")
    report.save(output_dir)

    if not args.quiet:
        s = report.summary
        rows = [
            ["Decedents", s.n_decedents, s.n_filtered],
            ["Mean hazard higher (JM-RMT)", f"{s.proportion_mean_higher:.3f}",
             "-" if s.filtered_proportion_mean_higher is None else f"{s.filtered_proportion_mean_higher:.3f}"],
            ["Draw exceedance > 0.5", f"{s.proportion_draws_above_half:.3f}",
             "-" if s.filtered_proportion_draws_above_half is None else f"{s.filtered_proportion_draws_above_half:.3f}"],
        ]
        print(tabulate(rows, headers=["", "All", "Filtered"], tablefmt="grid"))
        print(f"Zero years on medication: JM-RMT {s.zero_med_years_jmrmt:.3f}, LOCF {s.zero_med_years_locf:.3f}")
        print(f"Report written to {output_dir}")
    return 0
