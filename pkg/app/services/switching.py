"""
Latent switch ages between visits, medication timelines and the
years-on-medication feature
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Mapping, Sequence

import numpy as np
from scipy.special import log_expit, logsumexp

from app.core.exceptions import ContractViolation, NumericDomainError
from app.models.domain import MedicationTimeline
from app.models.parameters import MedicationParams
from app.services.medication import transition_logit


class Direction(str, Enum):
    OFF_TO_ON = "OffToOn"
    ON_TO_OFF = "OnToOff"

    @property
    def previous_status(self) -> int:
        return 0 if self is Direction.OFF_TO_ON else 1


@dataclass(frozen=True)
class SwitchInterval:
    """Visit interval (prev_age, age] whose endpoint statuses differ; j indexes the right endpoint"""
    j: int
    prev_age: int
    age: int
    direction: Direction

    def __post_init__(self):
        if self.age <= self.prev_age:
            raise NumericDomainError(f"empty switch interval ({self.prev_age}, {self.age}]", self.age)

    @property
    def candidate_ages(self) -> np.ndarray:
        return np.arange(self.prev_age + 1, self.age + 1)

    @property
    def n_candidates(self) -> int:
        return self.age - self.prev_age


def switching_intervals(ages: Sequence[int], statuses: Sequence[int]) -> List[SwitchInterval]:
    """Intervals between consecutive visits with differing resolved statuses"""
    if any(m not in (0, 1) for m in statuses):
        raise ContractViolation(f"statuses must be resolved, got {list(statuses)}")
    intervals = []
    for j in range(1, len(statuses)):
        if statuses[j] != statuses[j - 1]:
            direction = Direction.OFF_TO_ON if statuses[j] == 1 else Direction.ON_TO_OFF
            intervals.append(SwitchInterval(j=j, prev_age=int(ages[j - 1]), age=int(ages[j]), direction=direction))
    return intervals


def switch_logits(med_params: MedicationParams, interval: SwitchInterval, g_mu_prev: float,
                  age_center: float = 0.0) -> np.ndarray:
    """Transition-model linear predictor at each candidate age, anchored at the previous visit"""
    return transition_logit(med_params, interval.direction.previous_status, interval.candidate_ages,
                            interval.prev_age, g_mu_prev, age_center)


def switch_log_probs(logits) -> np.ndarray:
    """log of inv_logit(l_k) / sum_k inv_logit(l_k)"""
    logits = np.asarray(logits, dtype=float)
    if logits.size == 0:
        raise NumericDomainError("switch interval has no candidate ages")
    weights = log_expit(logits)
    return weights - logsumexp(weights)


def switch_distribution(med_params: MedicationParams, interval: SwitchInterval, g_mu_prev: float,
                        age_center: float = 0.0) -> np.ndarray:
    """Probability of each candidate switch age of the interval"""
    return np.exp(switch_log_probs(switch_logits(med_params, interval, g_mu_prev, age_center)))


def build_timeline(ages: Sequence[int], statuses: Sequence[int], switch_ages: Mapping[int, int]) -> MedicationTimeline:
    """
    Yearly status from the first to the last visit. switch_ages maps the right-endpoint
    visit index of every switching interval to its switch age; the new status holds from
    the switch age onward.
    """
    intervals = {iv.j: iv for iv in switching_intervals(ages, statuses)}
    if set(switch_ages) != set(intervals):
        raise ContractViolation(
            f"switch map covers intervals {sorted(switch_ages)} but switching intervals are {sorted(intervals)}")

    start = int(ages[0])
    status = np.empty(int(ages[-1]) - start + 1, dtype=int)
    status[0] = statuses[0]
    for j in range(1, len(ages)):
        lo, hi = int(ages[j - 1]), int(ages[j])
        if j in intervals:
            s = int(switch_ages[j])
            if not lo < s <= hi:
                raise ContractViolation(f"switch age {s} outside interval ({lo}, {hi}]")
            status[lo + 1 - start:s - start] = statuses[j - 1]
            status[s - start:hi + 1 - start] = statuses[j]
        else:
            status[lo + 1 - start:hi + 1 - start] = statuses[j]
    return MedicationTimeline(start_age=start, status=tuple(int(v) for v in status))


def years_on_med(timeline: MedicationTimeline, up_to):
    """
    Years on medication accrued by age `up_to`, capped at the last visit.
    Integer age l counts as a whole year when on. For non-integer t the fraction
    t - floor(t) accrues at the status of year floor(t) + 1, the year being entered,
    not at the status of year floor(t). The feature is then continuous and
    non-decreasing, and reaches the whole-year count at floor(t) + 1.
    On 65..69 with last visit 69 gives 5 at t = 70.
    """
    t = np.asarray(up_to, dtype=float)
    if np.any(t < timeline.start_age):
        raise NumericDomainError(f"age {float(np.min(t))} before timeline start {timeline.start_age}",
                                 float(np.min(t)))
    status = timeline.as_array()
    cumulative = np.cumsum(status)
    capped = np.minimum(t, timeline.end_age)
    whole = np.floor(capped).astype(int) - timeline.start_age
    fraction = capped - np.floor(capped)
    entering = np.minimum(whole + 1, len(status) - 1)
    result = cumulative[whole] + fraction * status[entering]
    return float(result) if result.ndim == 0 else result


def timeline_grid(timeline: MedicationTimeline) -> List[int]:
    """
    Every integer age of the timeline. Status changes and kinks of years_on_med
    fall on these ages whatever the switch ages are, so quadrature split here
    does not move when the latent state changes.
    """
    return list(range(timeline.start_age, timeline.end_age + 1))


def late_switch_map(ages: Sequence[int], statuses: Sequence[int]) -> Dict[int, int]:
    """Every switch placed at the right endpoint of its interval (carry-forward placement)"""
    return {iv.j: iv.age for iv in switching_intervals(ages, statuses)}
