"""
JM-RMT vs LOCF comparison: hazard at observed death times and years on medication
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from app.core.exceptions import ResultsError
from app.models.domain import Cohort
from app.models.schemas import HazardComparison
from app.services.cohort_service import CohortService
from app.services.results import LoadedFit, ResultsStore

logger = logging.getLogger(__name__)

TIE_RTOL = 1e-12


@dataclass
class ComparisonReport:
    summary: HazardComparison
    per_subject: pd.DataFrame
    med_years_crosstab: pd.DataFrame

    def save(self, output_dir: Path) -> Path:
        output_dir = Path(output_dir)
        ResultsStore.write_json(self.summary.model_dump(), output_dir / "comparison.json")
        ResultsStore.write_frame(self.per_subject, output_dir / "exceedance.csv")
        ResultsStore.write_frame(self.med_years_crosstab, output_dir / "med_years_crosstab.csv", index=True)
        logger.info(f"Saved comparison report to {output_dir}")
        return output_dir


def _proportion(values: pd.Series) -> Optional[float]:
    return float(values.mean()) if len(values) else None


def _align(frame: pd.DataFrame, ids, what: str) -> pd.DataFrame:
    missing = [i for i in ids if i not in frame.columns]
    if missing:
        raise ResultsError(f"{what} has no draws for subjects {missing[:5]}")
    return frame[list(ids)]


def _hazard_draws(log_hazard: pd.DataFrame) -> np.ndarray:
    # row-major so both fits reduce in the same order
    return np.exp(np.ascontiguousarray(log_hazard.to_numpy(dtype=float)))


def _strictly_higher(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a > b, with values equal up to rounding counted as ties"""
    return (a > b) & ~np.isclose(a, b, rtol=TIE_RTOL, atol=0.0)


def compare_hazards(jmrmt_log_hazard: pd.DataFrame, locf_log_hazard: pd.DataFrame, cohort: Cohort,
                    jmrmt_med_years: pd.DataFrame, locf_med_years: pd.DataFrame) -> ComparisonReport:
    """
    Per decedent: posterior-mean hazard at the death time under each model, and the
    share of paired draws where the JM-RMT hazard is strictly higher. Ties count as
    not higher. The filtered set drops subjects whose medication is fully observed
    and constant, since both models give them the same feature.
    """
    decedents = [s for s in cohort if s.event_indicator]
    if not decedents:
        raise ResultsError("comparison needs at least one decedent")
    ids = [s.id for s in decedents]
    jm = _align(jmrmt_log_hazard, ids, "JM-RMT fit")
    lo = _align(locf_log_hazard, ids, "LOCF fit")
    if len(jm) != len(lo):
        raise ResultsError(f"fits have different numbers of retained draws ({len(jm)} vs {len(lo)})")

    jm_hazard, lo_hazard = _hazard_draws(jm), _hazard_draws(lo)
    jm_mean, lo_mean = jm_hazard.mean(axis=0), lo_hazard.mean(axis=0)
    per_subject = pd.DataFrame({
        "id": ids,
        "jmrmt_mean_hazard": jm_mean,
        "locf_mean_hazard": lo_mean,
        "exceedance": _strictly_higher(jm_hazard, lo_hazard).mean(axis=0),
        "filtered": [not CohortService.is_fully_observed_constant(s) for s in decedents],
    })
    per_subject["mean_higher"] = _strictly_higher(jm_mean, lo_mean)
    per_subject["above_half"] = per_subject["exceedance"] > 0.5

    filtered = per_subject[per_subject["filtered"]]
    all_ids = list(cohort.ids)
    jm_years = _align(jmrmt_med_years, all_ids, "JM-RMT fit").mean(axis=0)
    lo_years = _align(locf_med_years, all_ids, "LOCF fit").mean(axis=0)

    summary = HazardComparison(
        n_decedents=len(ids),
        proportion_mean_higher=float(per_subject["mean_higher"].mean()),
        proportion_draws_above_half=float(per_subject["above_half"].mean()),
        n_filtered=len(filtered),
        filtered_proportion_mean_higher=_proportion(filtered["mean_higher"]),
        filtered_proportion_draws_above_half=_proportion(filtered["above_half"]),
        zero_med_years_jmrmt=float((jm_years == 0).mean()),
        zero_med_years_locf=float((lo_years == 0).mean()),
    )
    logger.info(f"Compared {len(ids)} decedents: JM-RMT mean hazard higher for "
                f"{summary.proportion_mean_higher:.1%}, filtered set {summary.n_filtered}")
    return ComparisonReport(summary=summary, per_subject=per_subject,
                            med_years_crosstab=med_years_crosstab(jm_years, lo_years))


def med_years_crosstab(jmrmt_years: pd.Series, locf_years: pd.Series) -> pd.DataFrame:
    """Counts of (JM-RMT posterior mean, LOCF) years on medication, both rounded to whole years"""
    table = pd.crosstab(np.rint(jmrmt_years.to_numpy()).astype(int), np.rint(locf_years.to_numpy()).astype(int),
                        rownames=["jmrmt_years"], colnames=["locf_years"])
    return table


def check_fit_pair(jmrmt: LoadedFit, locf: LoadedFit, cohort: Cohort):
    if jmrmt.model != "jmrmt":
        raise ResultsError(f"{jmrmt.path} holds a '{jmrmt.model}' fit, expected jmrmt")
    if locf.model != "locf":
        raise ResultsError(f"{locf.path} holds a '{locf.model}' fit, expected locf")
    ids = list(cohort.ids)
    for fit in (jmrmt, locf):
        if fit.subject_ids != ids:
            raise ResultsError(f"{fit.path} was fitted on a different cohort than the one given")


def compare_fits(jmrmt: LoadedFit, locf: LoadedFit, cohort: Cohort) -> ComparisonReport:
    """Compare two fit directories of the same cohort"""
    check_fit_pair(jmrmt, locf, cohort)
    return compare_hazards(
        jmrmt.pooled(jmrmt.event_log_hazard), locf.pooled(locf.event_log_hazard), cohort,
        jmrmt.pooled(jmrmt.med_years), locf.pooled(locf.med_years),
    )
