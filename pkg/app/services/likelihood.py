"""
Per-subject complete-data log-likelihood, shared by the oracle, the sampler
and the LOCF baseline
"""

from dataclasses import dataclass
from typing import Mapping, Sequence, Tuple

import numpy as np

from app.core.exceptions import ContractViolation
from app.models.domain import AugmentedState, MedicationTimeline, MedStatus, Subject
from app.models.parameters import Parameters
from app.services.longitudinal import mu
from app.services.medication import initial_status_logprob, med_loglik
from app.services.numerics import GK15, BSplineBasis, GKRule, skew_normal_logpdf
from app.services.survival import EventDesign, FeaturePath
from app.services.switching import (
    build_timeline, switch_log_probs, switch_logits, switching_intervals, timeline_grid, years_on_med,
)


@dataclass(frozen=True)
class ModelSpec:
    """Fixed model structure: spline basis, age centering and whether latent switches are modeled"""
    basis: BSplineBasis
    age_center: float = 65.0
    augment: bool = True
    rule: GKRule = GK15


@dataclass(frozen=True)
class SubjectData:
    subject: Subject
    ages: np.ndarray
    y: np.ndarray
    has_y: np.ndarray
    observed: Tuple[int, ...]

    @classmethod
    def from_subject(cls, subject: Subject) -> "SubjectData":
        y = subject.y
        return cls(subject=subject, ages=subject.ages, y=y, has_y=~np.isnan(y),
                   observed=tuple(int(m) for m in subject.statuses))

    @property
    def id(self) -> str:
        return self.subject.id

    @property
    def int_ages(self) -> Tuple[int, ...]:
        return tuple(v.age for v in self.subject.visits)

    @property
    def first_age(self) -> float:
        return float(self.ages[0])

    @property
    def last_age(self) -> float:
        return float(self.ages[-1])

    @property
    def missing(self) -> Tuple[int, ...]:
        return tuple(j for j, m in enumerate(self.observed) if m == MedStatus.MISSING)


@dataclass(frozen=True)
class Components:
    longitudinal: float = 0.0
    medication: float = 0.0
    switching: float = 0.0
    initial: float = 0.0
    event: float = 0.0

    @property
    def total(self) -> float:
        return self.longitudinal + self.medication + self.switching + self.initial + self.event


def _check_resolved(data: SubjectData, statuses: Sequence[int]):
    if len(statuses) != len(data.observed):
        raise ContractViolation(f"subject {data.id}: {len(statuses)} statuses for {len(data.observed)} visits")
    for j, (m, obs) in enumerate(zip(statuses, data.observed)):
        if m not in (0, 1):
            raise ContractViolation(f"subject {data.id}: status at visit {j} unresolved")
        if obs != MedStatus.MISSING and m != obs:
            raise ContractViolation(f"subject {data.id}: status at visit {j} contradicts the observed value")


def visit_mu(params: Parameters, data: SubjectData, b, statuses: Sequence[int], age_center: float) -> np.ndarray:
    return mu(params.longitudinal, data.subject.covariates, b, data.ages - age_center, np.asarray(statuses))


def longitudinal_term(params: Parameters, data: SubjectData, b, statuses: Sequence[int], age_center: float) -> float:
    if not data.has_y.any():
        return 0.0
    lon = params.longitudinal
    location = visit_mu(params, data, b, statuses, age_center)[data.has_y]
    return float(np.sum(skew_normal_logpdf(data.y[data.has_y], location, lon.omega, lon.nu)))


def medication_term(params: Parameters, data: SubjectData, b, statuses: Sequence[int], age_center: float) -> float:
    g_mu = visit_mu(params, data, b, statuses, age_center)
    return med_loglik(params.medication, data.ages, statuses, g_mu, age_center)


def initial_term(params: Parameters, data: SubjectData, b, statuses: Sequence[int], age_center: float) -> float:
    """Prior on an unobserved first status; zero when the first status is observed"""
    if data.observed[0] != MedStatus.MISSING:
        return 0.0
    cov, age = data.subject.covariates, data.first_age
    g_off = float(mu(params.longitudinal, cov, b, age - age_center, 0))
    g_on = float(mu(params.longitudinal, cov, b, age - age_center, 1))
    return initial_status_logprob(params.medication, statuses[0], age, g_off, g_on, age_center)


def switching_term(params: Parameters, data: SubjectData, b, statuses: Sequence[int],
                   switch_ages: Mapping[int, int], age_center: float) -> float:
    g_mu = visit_mu(params, data, b, statuses, age_center)
    total = 0.0
    for interval in switching_intervals(data.int_ages, statuses):
        log_probs = switch_log_probs(switch_logits(params.medication, interval, g_mu[interval.j - 1], age_center))
        total += float(log_probs[switch_ages[interval.j] - interval.prev_age - 1])
    return total


def interval_switch_log_probs(params: Parameters, data: SubjectData, b, statuses: Sequence[int], j: int,
                              age_center: float) -> np.ndarray:
    """Switch-age log probabilities of the interval ending at visit j"""
    interval = next(iv for iv in switching_intervals(data.int_ages, statuses) if iv.j == j)
    g_prev = float(visit_mu(params, data, b, statuses, age_center)[j - 1])
    return switch_log_probs(switch_logits(params.medication, interval, g_prev, age_center))


def feature_path(params: Parameters, data: SubjectData, b, timeline: MedicationTimeline,
                 age_center: float) -> FeaturePath:
    """Risk-factor and medication features frozen at the last visit"""
    lon, cov = params.longitudinal, data.subject.covariates
    last = data.last_age
    status = timeline.as_array()
    b = np.asarray(b, dtype=float)

    def g_mu(t):
        a = np.minimum(np.asarray(t, dtype=float), last)
        idx = np.clip(np.floor(a).astype(int) - timeline.start_age, 0, len(status) - 1)
        return mu(lon, cov, b, a - age_center, status[idx])

    def g_m(t):
        return np.asarray(years_on_med(timeline, np.minimum(np.asarray(t, dtype=float), last)), dtype=float)

    return FeaturePath(x=cov.design(), last_age=last, g_mu=g_mu, g_m=g_m,
                       breakpoints=tuple(float(p) for p in timeline_grid(timeline)))


def subject_timeline(data: SubjectData, state: AugmentedState) -> MedicationTimeline:
    return build_timeline(data.int_ages, state.statuses, state.switch_ages)


def event_design(params: Parameters, spec: ModelSpec, data: SubjectData, b,
                 timeline: MedicationTimeline) -> EventDesign:
    path = feature_path(params, data, b, timeline, spec.age_center)
    subject = data.subject
    return EventDesign.build(spec.basis, path, data.first_age, subject.event_time, subject.event_indicator, spec.rule)


def subject_components(params: Parameters, spec: ModelSpec, data: SubjectData, state: AugmentedState) -> Components:
    """All likelihood factors of one subject given its latent state (random-effects density excluded)"""
    statuses = state.statuses
    _check_resolved(data, statuses)
    timeline = subject_timeline(data, state)
    b, c = state.b, spec.age_center
    return Components(
        longitudinal=longitudinal_term(params, data, b, statuses, c),
        medication=medication_term(params, data, b, statuses, c),
        switching=switching_term(params, data, b, statuses, state.switch_ages, c) if spec.augment else 0.0,
        initial=initial_term(params, data, b, statuses, c) if spec.augment else 0.0,
        event=event_design(params, spec, data, b, timeline).loglik(params.hazard),
    )


def subject_loglik(params: Parameters, spec: ModelSpec, data: SubjectData, state: AugmentedState) -> float:
    return subject_components(params, spec, data, state).total
