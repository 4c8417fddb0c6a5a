"""
Domain types for cohorts, medication timelines and per-subject latent state
"""

from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Dict, Iterator, Optional, Sequence, Tuple

import numpy as np

MIN_AGE = 40
MAX_AGE = 110


class Education(str, Enum):
    LESS_HS = "LessHS"
    HS = "HS"
    MORE_HS = "MoreHS"


class Race(str, Enum):
    BLACK = "Black"
    NON_BLACK = "NonBlack"


class Sex(str, Enum):
    MEN = "Men"
    WOMEN = "Women"


class MedStatus(IntEnum):
    MISSING = -1
    OFF = 0
    ON = 1

    @property
    def observed(self) -> bool:
        return self is not MedStatus.MISSING


@dataclass(frozen=True)
class Covariates:
    education: Education
    race: Race
    sex: Sex

    def design(self) -> np.ndarray:
        """Contrast vector (HS vs -HS, +HS vs -HS, Black vs non-Black)"""
        return np.array([
            float(self.education is Education.HS),
            float(self.education is Education.MORE_HS),
            float(self.race is Race.BLACK),
        ])


@dataclass(frozen=True)
class Visit:
    age: int
    y: Optional[float]
    med: MedStatus


@dataclass(frozen=True)
class Subject:
    id: str
    covariates: Covariates
    visits: Tuple[Visit, ...]
    event_time: float
    event_indicator: int

    @property
    def n_visits(self) -> int:
        return len(self.visits)

    @property
    def ages(self) -> np.ndarray:
        return np.array([v.age for v in self.visits], dtype=float)

    @property
    def y(self) -> np.ndarray:
        return np.array([np.nan if v.y is None else v.y for v in self.visits], dtype=float)

    @property
    def statuses(self) -> Tuple[MedStatus, ...]:
        return tuple(v.med for v in self.visits)

    @property
    def first_age(self) -> int:
        return self.visits[0].age

    @property
    def last_age(self) -> int:
        return self.visits[-1].age

    @property
    def missing_visits(self) -> Tuple[int, ...]:
        return tuple(j for j, v in enumerate(self.visits) if not v.med.observed)


@dataclass(frozen=True)
class Cohort:
    subjects: Tuple[Subject, ...]
    label: str = "cohort"

    def __len__(self) -> int:
        return len(self.subjects)

    def __iter__(self) -> Iterator[Subject]:
        return iter(self.subjects)

    def by_id(self) -> Dict[str, Subject]:
        return {s.id: s for s in self.subjects}

    @property
    def ids(self) -> Tuple[str, ...]:
        return tuple(s.id for s in self.subjects)


@dataclass(frozen=True)
class MedicationTimeline:
    """
    On/off status for every integer age from the first to the last visit.
    A switch at age s means the new status holds from age s onward.
    """
    start_age: int
    status: Tuple[int, ...]

    @property
    def end_age(self) -> int:
        return self.start_age + len(self.status) - 1

    def status_at(self, age: int) -> int:
        """Status at an integer age; ages past the end keep the last status"""
        if age < self.start_age:
            raise ValueError(f"age {age} before timeline start {self.start_age}")
        return self.status[min(age, self.end_age) - self.start_age]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.status, dtype=float)

    def switch_ages(self) -> Tuple[int, ...]:
        arr = self.as_array()
        changes = np.nonzero(np.diff(arr))[0] + 1
        return tuple(int(self.start_age + k) for k in changes)


@dataclass(frozen=True)
class AugmentedState:
    """
    Latent variables of one subject: random effects, resolved visit statuses
    and switch ages keyed by the visit index of each interval's right endpoint.
    """
    b: np.ndarray
    statuses: Tuple[int, ...]
    switch_ages: Dict[int, int] = field(default_factory=dict)

    def with_b(self, b: np.ndarray) -> "AugmentedState":
        return replace(self, b=np.asarray(b, dtype=float))

    def with_statuses(self, statuses: Sequence[int], switch_ages: Dict[int, int]) -> "AugmentedState":
        return replace(self, statuses=tuple(int(m) for m in statuses), switch_ages=dict(switch_ages))

    def configuration_key(self) -> str:
        """Compact label of the discrete augmentation, e.g. '1,1,0|2:68'"""
        statuses = ",".join(str(m) for m in self.statuses)
        switches = ",".join(f"{j}:{a}" for j, a in sorted(self.switch_ages.items()))
        return f"{statuses}|{switches}"
