"""
Brute-force observed-data likelihood: sums the complete-data likelihood over
every imputation of missing statuses and every switch-age placement.
Conditional on the random effects; meant for small instances only.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from scipy.special import logsumexp

from app.core.exceptions import IntractableInstanceError
from app.models.domain import AugmentedState, Subject
from app.models.parameters import Parameters
from app.services.likelihood import ModelSpec, SubjectData, subject_loglik
from app.services.switching import switching_intervals

logger = logging.getLogger(__name__)

MAX_VISITS = 5
MAX_GAP = 6


@dataclass(frozen=True)
class Configuration:
    statuses: Tuple[int, ...]
    switch_ages: Dict[int, int]

    def as_state(self, b) -> AugmentedState:
        return AugmentedState(b=np.asarray(b, dtype=float), statuses=self.statuses, switch_ages=dict(self.switch_ages))

    @property
    def key(self) -> str:
        return self.as_state(np.zeros(2)).configuration_key()


def check_tractable(subject: Subject, max_visits: int = MAX_VISITS, max_gap: int = MAX_GAP):
    gaps = np.diff(subject.ages)
    widest = int(gaps.max()) if len(gaps) else 0
    if subject.n_visits > max_visits or widest > max_gap:
        raise IntractableInstanceError(
            f"subject {subject.id}: {subject.n_visits} visits (max {max_visits}), widest gap {widest} years "
            f"(max {max_gap}), {len(subject.missing_visits)} missing statuses; refusing to enumerate")


def enumerate_augmentations(subject: Subject, max_visits: int = MAX_VISITS, max_gap: int = MAX_GAP) -> List[Configuration]:
    """Every status imputation crossed with every switch-age placement, one switch per interval"""
    check_tractable(subject, max_visits, max_gap)
    ages = [v.age for v in subject.visits]
    missing = subject.missing_visits
    observed = [int(m) for m in subject.statuses]

    configurations = []
    for imputed in itertools.product((0, 1), repeat=len(missing)):
        statuses = list(observed)
        for j, value in zip(missing, imputed):
            statuses[j] = value
        intervals = switching_intervals(ages, statuses)
        for placement in itertools.product(*(iv.candidate_ages for iv in intervals)):
            configurations.append(Configuration(
                statuses=tuple(statuses),
                switch_ages={iv.j: int(s) for iv, s in zip(intervals, placement)},
            ))
    return configurations


def configuration_logweights(params: Parameters, spec: ModelSpec, subject: Subject, b) -> Dict[str, float]:
    """Complete-data log-likelihood of every configuration, keyed by configuration key"""
    data = SubjectData.from_subject(subject)
    return {
        config.key: subject_loglik(params, spec, data, config.as_state(b))
        for config in enumerate_augmentations(subject)
    }


def configuration_probabilities(params: Parameters, spec: ModelSpec, subject: Subject, b) -> Dict[str, float]:
    """Normalized posterior weights of the configurations given b and the parameters"""
    weights = configuration_logweights(params, spec, subject, b)
    norm = logsumexp(list(weights.values()))
    return {key: float(np.exp(value - norm)) for key, value in weights.items()}


def observed_loglik(params: Parameters, spec: ModelSpec, subject: Subject, b) -> float:
    """log of the sum over configurations of the complete-data likelihood, b held fixed"""
    weights = configuration_logweights(params, spec, subject, b)
    logger.debug(f"Oracle for subject {subject.id}: {len(weights)} configurations")
    return float(logsumexp(list(weights.values())))
