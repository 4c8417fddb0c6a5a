"""
Generative simulator for synthetic cohorts with known switch ages and random effects
"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import bisect
from scipy.stats import skewnorm

from app.core.exceptions import SimulationError
from app.models.domain import (
    Cohort, Covariates, Education, MedicationTimeline, MedStatus, Race, Sex, Subject, Visit,
)
from app.models.parameters import Parameters
from app.models.schemas import SimulationConfig
from app.services.cohort_service import CohortService
from app.services.likelihood import SubjectData, feature_path
from app.services.longitudinal import mu, sample_random_effects
from app.services.medication import stationary_on_prob, transition_prob
from app.services.numerics import GK15, BSplineBasis
from app.services.results import ResultsStore
from app.services.survival import cumulative_hazard

logger = logging.getLogger(__name__)

# Cohort composition by sex: share of Black participants and education (-HS, HS, +HS)
BLACK_FREQ = {Sex.MEN: 0.28, Sex.WOMEN: 0.33}
EDUCATION_FREQS = {Sex.MEN: [0.18, 0.17, 0.65], Sex.WOMEN: [0.25, 0.22, 0.53]}

EDUCATION_LEVELS = (Education.LESS_HS, Education.HS, Education.MORE_HS)
TRUTH_COLUMNS = ["id", "interval_j", "true_switch_age", "true_b0", "true_b1"]
BISECT_XTOL = 1e-8


@dataclass
class SimulatedSubject:
    subject: Subject
    b: np.ndarray
    # (visit index of the interval's right endpoint, switch age) for every change of status
    switches: List[Tuple[int, int]]
    resamples: int


@dataclass
class SimulationResult:
    cohort: Cohort
    truth: pd.DataFrame
    params: Parameters
    basis: BSplineBasis
    config: SimulationConfig
    seed: int

    def save(self, output_dir: Path) -> Path:
        """cohort.csv, truth.csv, params.json and manifest.json"""
        output_dir = Path(output_dir)
        CohortService.save_cohort(self.cohort, output_dir / "cohort.csv")
        ResultsStore.write_frame(self.truth, output_dir / "truth.csv")
        ResultsStore.write_json(self.params.to_flat(), output_dir / "params.json")
        ResultsStore.write_json({
            "command": "simulate",
            "seed": self.seed,
            "cohort_label": self.cohort.label,
            "n_subjects": len(self.cohort),
            "config": self.config.model_dump(mode="json"),
            "basis": {"degree": self.basis.degree, "interior_knots": list(self.basis.interior_knots),
                      "lo": self.basis.lo, "hi": self.basis.hi},
            "versions": ResultsStore.package_versions(),
        }, output_dir / "manifest.json")
        logger.info(f"Saved simulated cohort ({len(self.cohort)} subjects) to {output_dir}")
        return output_dir


def simulation_basis(config: SimulationConfig) -> BSplineBasis:
    """Evenly spaced interior knots over [youngest baseline age, censoring age]"""
    lo, hi = float(config.baseline_age_min), float(config.censor_age)
    probs = np.arange(1, config.interior_knots + 1) / (config.interior_knots + 1)
    return BSplineBasis(degree=config.spline_degree, interior_knots=tuple(lo + (hi - lo) * probs), lo=lo, hi=hi)


def draw_covariates(config: SimulationConfig, rng: np.random.Generator) -> Covariates:
    black = config.black_freq if config.black_freq is not None else BLACK_FREQ[config.sex]
    freqs = config.education_freqs if config.education_freqs is not None else EDUCATION_FREQS[config.sex]
    education = EDUCATION_LEVELS[rng.choice(3, p=np.asarray(freqs) / np.sum(freqs))]
    race = Race.BLACK if rng.random() < black else Race.NON_BLACK
    return Covariates(education=education, race=race, sex=config.sex)


def annual_medication_path(params: Parameters, covariates: Covariates, b: np.ndarray, first_age: int,
                           last_age: int, age_center: float, rng: np.random.Generator) -> np.ndarray:
    """
    Yearly status from the first to the last scheduled visit. The first year is drawn
    from the stationary on-probability, then each year from the one-year transition.
    """
    lon, med = params.longitudinal, params.medication
    g_off = float(mu(lon, covariates, b, first_age - age_center, 0))
    g_on = float(mu(lon, covariates, b, first_age - age_center, 1))
    path = np.empty(last_age - first_age + 1, dtype=int)
    path[0] = int(rng.random() < stationary_on_prob(med, first_age, g_off, g_on, age_center))
    for k in range(1, len(path)):
        age = first_age + k
        g_prev = float(mu(lon, covariates, b, age - 1 - age_center, path[k - 1]))
        path[k] = int(rng.random() < float(transition_prob(med, path[k - 1], age, age - 1, g_prev, age_center)))
    return path


def path_switches(path: np.ndarray, first_age: int, visit_ages: List[int]) -> List[Tuple[int, int]]:
    """Every status change as (right-endpoint visit index, age)"""
    changes = [first_age + k for k in np.nonzero(np.diff(path))[0] + 1]
    return [(int(np.searchsorted(visit_ages, s)), int(s)) for s in changes]


def single_switch_intervals(switches: List[Tuple[int, int]]) -> bool:
    intervals = [j for j, _ in switches]
    return len(intervals) == len(set(intervals))


def draw_event_time(params: Parameters, basis: BSplineBasis, subject: Subject, b: np.ndarray,
                    timeline: MedicationTimeline, censor_age: float, age_center: float,
                    rng: np.random.Generator) -> Tuple[float, int]:
    """
    Invert the cumulative hazard from the first visit by bisection; censor at censor_age.
    Between visit k and visit k + 1 the hazard uses the features of the subject truncated
    at visit k, frozen after it, which is the path a fit sees when death falls there.
    """
    target = rng.exponential()
    ages = [float(v.age) for v in subject.visits]
    ends = [*ages[1:], float(censor_age)]
    accrued = 0.0
    for k, (start, end) in enumerate(zip(ages, ends)):
        end = min(end, float(censor_age))
        if end <= start:
            continue
        truncated = replace(subject, visits=subject.visits[:k + 1])
        known = MedicationTimeline(start_age=timeline.start_age,
                                   status=timeline.status[:int(ages[k]) - timeline.start_age + 1])
        path = feature_path(params, SubjectData.from_subject(truncated), b, known, age_center)
        segment = cumulative_hazard(params.hazard, basis, path, start, end, GK15)
        if not np.isfinite(segment):
            raise SimulationError(f"subject {subject.id}: cumulative hazard is not finite")
        if accrued + segment > target:
            remaining = target - accrued
            root = bisect(lambda t: cumulative_hazard(params.hazard, basis, path, start, t, GK15) - remaining,
                          start, end, xtol=BISECT_XTOL)
            return float(root), 1
        accrued += segment
    return float(censor_age), 0


def simulate_subject(index: int, params: Parameters, basis: BSplineBasis, config: SimulationConfig,
                     rng: np.random.Generator) -> SimulatedSubject:
    subject_id = str(index + 1)
    covariates = draw_covariates(config, rng)
    b = sample_random_effects(params.longitudinal.sigma, rng)[0]
    first_age = int(rng.integers(config.baseline_age_min, config.baseline_age_max + 1))
    visit_ages = list(np.cumsum([first_age, *config.visit_gaps]).astype(int))

    resamples = 0
    while True:
        path = annual_medication_path(params, covariates, b, first_age, visit_ages[-1], config.age_center, rng)
        switches = path_switches(path, first_age, visit_ages)
        if not config.max_one_switch_per_interval or single_switch_intervals(switches):
            break
        resamples += 1
        if resamples >= config.max_resample:
            raise SimulationError(
                f"subject {subject_id}: no medication path with at most one switch per interval "
                f"after {config.max_resample} draws")

    lon = params.longitudinal
    statuses = [int(path[a - first_age]) for a in visit_ages]
    noise = skewnorm.rvs(lon.nu, loc=0.0, scale=lon.omega, size=len(visit_ages), random_state=rng)
    y = mu(lon, covariates, b, np.asarray(visit_ages, dtype=float) - config.age_center, np.asarray(statuses)) + noise

    scheduled = Subject(
        id=subject_id,
        covariates=covariates,
        visits=tuple(Visit(age=a, y=float(v), med=MedStatus(m)) for a, v, m in zip(visit_ages, y, statuses)),
        event_time=float(config.censor_age),
        event_indicator=0,
    )
    timeline = MedicationTimeline(start_age=first_age, status=tuple(int(v) for v in path))
    event_time, indicator = draw_event_time(params, basis, scheduled, b, timeline, config.censor_age,
                                            config.age_center, rng)

    # visits after death or censoring never happen
    kept = [v for v in scheduled.visits if v.age <= event_time]
    blanked = [Visit(age=v.age, y=v.y, med=MedStatus.MISSING) if rng.random() < config.missing_rate else v
               for v in kept]
    subject = Subject(id=subject_id, covariates=covariates, visits=tuple(blanked),
                      event_time=event_time, event_indicator=indicator)
    kept_switches = [(j, s) for j, s in switches if j < len(kept)]
    return SimulatedSubject(subject=subject, b=b, switches=kept_switches, resamples=resamples)


def truth_frame(simulated: List[SimulatedSubject]) -> pd.DataFrame:
    """One row per true switch; subjects without switches get one row with an empty interval"""
    rows: List[Dict[str, object]] = []
    for sim in simulated:
        b0, b1 = float(sim.b[0]), float(sim.b[1])
        if not sim.switches:
            rows.append({"id": sim.subject.id, "interval_j": pd.NA, "true_switch_age": pd.NA,
                         "true_b0": b0, "true_b1": b1})
        for j, s in sim.switches:
            rows.append({"id": sim.subject.id, "interval_j": j, "true_switch_age": s, "true_b0": b0, "true_b1": b1})
    frame = pd.DataFrame(rows, columns=TRUTH_COLUMNS)
    frame["interval_j"] = frame["interval_j"].astype("Int64")
    frame["true_switch_age"] = frame["true_switch_age"].astype("Int64")
    return frame


def simulate_cohort(params: Parameters, config: SimulationConfig, seed: Optional[int] = None,
                    basis: Optional[BSplineBasis] = None) -> SimulationResult:
    """Draw a cohort and its ground truth; per-subject random streams spawned from the seed"""
    basis = basis or simulation_basis(config)
    if len(params.hazard.kappa) != basis.n_basis:
        raise SimulationError(f"{len(params.hazard.kappa)} spline coefficients for a basis of {basis.n_basis}")
    if seed is None:
        seed = config.seed if config.seed is not None else int(np.random.SeedSequence().entropy % (2 ** 63))
    streams = np.random.SeedSequence(seed).spawn(config.n)

    simulated = [simulate_subject(i, params, basis, config, np.random.default_rng(s)) for i, s in enumerate(streams)]
    cohort = Cohort(subjects=tuple(s.subject for s in simulated), label=config.label)

    n_events = sum(s.subject.event_indicator for s in simulated)
    n_missing = sum(len(s.subject.missing_visits) for s in simulated)
    resamples = sum(s.resamples for s in simulated)
    logger.info(f"Simulated {config.n} subjects (seed {seed}): {n_events} events, "
                f"{n_missing} missing statuses, {resamples} resampled medication paths")
    return SimulationResult(cohort=cohort, truth=truth_frame(simulated), params=params, basis=basis,
                            config=config, seed=seed)
