"""
Last-observation-carried-forward baseline: deterministic statuses and timeline,
fitted with the same sampler with latent switches and imputations turned off
"""

import logging
from typing import Tuple

import numpy as np

from app.core.exceptions import ContractViolation
from app.models.domain import AugmentedState, Cohort, MedicationTimeline, Subject
from app.models.schemas import FitConfig
from app.services.switching import late_switch_map

logger = logging.getLogger(__name__)


def locf_statuses(subject: Subject) -> Tuple[int, ...]:
    """Visit statuses with missing values carried forward (backward before the first observation)"""
    observed = [int(m) for m in subject.statuses]
    known = [m for m in observed if m in (0, 1)]
    if not known:
        raise ContractViolation(f"subject {subject.id}: no observed medication status to carry forward")
    current = known[0]
    filled = []
    for m in observed:
        if m in (0, 1):
            current = m
        filled.append(current)
    return tuple(filled)


def locf_timeline(subject: Subject) -> MedicationTimeline:
    """Status at each integer age is the most recent observed status at or before it"""
    statuses = locf_statuses(subject)
    start = subject.first_age
    status = np.empty(subject.last_age - start + 1, dtype=int)
    for age, value in zip([v.age for v in subject.visits], statuses):
        status[age - start:] = value
    return MedicationTimeline(start_age=start, status=tuple(int(v) for v in status))


def locf_state(subject: Subject, b) -> AugmentedState:
    """Latent state whose timeline equals the carry-forward timeline: every switch at the later visit"""
    ages = [v.age for v in subject.visits]
    statuses = locf_statuses(subject)
    return AugmentedState(b=np.asarray(b, dtype=float), statuses=statuses, switch_ages=late_switch_map(ages, statuses))


def locf_years_on_med(subject: Subject) -> float:
    """Carry-forward years on medication at the last visit"""
    return float(np.sum(locf_timeline(subject).as_array()))


def fit_locf(cohort: Cohort, config: FitConfig, output_dir=None, jobs=None, quiet: bool = False):
    """Run the sampler with carry-forward medication features"""
    from app.services.sampler import run_fit

    config = config.model_copy(update={"options": config.options.model_copy(update={"model": "locf"})})
    logger.info(f"Fitting LOCF baseline on cohort '{cohort.label}' ({len(cohort)} subjects)")
    return run_fit(cohort, config, output_dir=output_dir, jobs=jobs, quiet=quiet)
