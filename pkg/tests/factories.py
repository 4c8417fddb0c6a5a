"""
Builders for small hand-made subjects and cohorts
"""

from typing import Optional, Sequence

import numpy as np

from app.models.domain import Cohort, Covariates, Education, MedStatus, Race, Sex, Subject, Visit
from app.services.oracle import enumerate_augmentations

NA = -1


def make_subject(sid: str = "1", ages: Sequence[int] = (65, 67, 69), meds: Sequence[int] = (0, 0, 0),
                 ys: Optional[Sequence[Optional[float]]] = None, event_time: float = 75.0, event_indicator: int = 1,
                 education: Education = Education.HS, race: Race = Race.NON_BLACK, sex: Sex = Sex.MEN) -> Subject:
    """meds uses -1 for a missing status"""
    ys = list(ys) if ys is not None else [180.0 - 0.5 * k for k in range(len(ages))]
    visits = tuple(Visit(age=int(a), y=y, med=MedStatus(m)) for a, y, m in zip(ages, ys, meds))
    return Subject(id=sid, covariates=Covariates(education=education, race=race, sex=sex), visits=visits,
                   event_time=float(event_time), event_indicator=int(event_indicator))


def make_cohort(*subjects: Subject, label: str = "test") -> Cohort:
    return Cohort(subjects=tuple(subjects), label=label)


def random_tiny_subject(rng, sid: str = "1", event_indicator: int = 1, max_visits: int = 4, max_gap: int = 4,
                        missing_rate: float = 0.35, max_configurations: int = 48) -> Subject:
    """Random subject small enough to enumerate, with at least two latent configurations"""
    while True:
        n = int(rng.integers(2, max_visits + 1))
        gaps = rng.integers(1, max_gap + 1, size=n - 1)
        ages = np.cumsum(np.r_[rng.integers(65, 69), gaps]).astype(int)
        meds = [NA if rng.random() < missing_rate else int(rng.random() < 0.5) for _ in range(n)]
        if all(m == NA for m in meds):
            continue
        subject = make_subject(sid, ages=tuple(int(a) for a in ages), meds=tuple(meds),
                               event_time=float(ages[-1] + rng.uniform(0.2, 5.0)), event_indicator=event_indicator)
        if 1 < len(enumerate_augmentations(subject)) <= max_configurations:
            return subject
