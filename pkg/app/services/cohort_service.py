"""
Cohort service: CSV ingestion, validation, canonical serialization
and medication-pattern summaries
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from app.core.exceptions import CohortFormatError, CohortValidationError
from app.models.domain import (
    MAX_AGE, MIN_AGE, Cohort, Covariates, Education, MedStatus, Race, Sex, Subject, Visit,
)

logger = logging.getLogger(__name__)

COLUMNS = ["id", "sex", "education", "race", "age", "y", "med", "event_time", "event_indicator"]
NA = "NA"

NEVER = "never"
ALWAYS = "always"
ON_OFF = "on_off"


@dataclass(frozen=True)
class ValidationIssue:
    severity: str          # "error" blocks fitting, "warning" does not
    rule: str
    subject_id: Optional[str] = None
    detail: str = ""

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def __str__(self) -> str:
        who = f"subject {self.subject_id}: " if self.subject_id is not None else ""
        extra = f" ({self.detail})" if self.detail else ""
        return f"{who}{self.rule}{extra}"


def _error(rule: str, subject_id: Optional[str] = None, detail: str = "") -> ValidationIssue:
    return ValidationIssue("error", rule, subject_id, detail)


def _warning(rule: str, subject_id: Optional[str] = None, detail: str = "") -> ValidationIssue:
    return ValidationIssue("warning", rule, subject_id, detail)


def _fmt(value: float) -> str:
    return f"{value:.10g}"


def _parse_age(raw: str, line: int) -> int:
    try:
        value = float(raw)
    except ValueError:
        raise CohortFormatError(f"age '{raw}' is not a number", line)
    if not value.is_integer():
        raise CohortFormatError(f"age '{raw}' must be an integer (age at last birthday)", line)
    return int(value)


def _parse_y(raw: str, line: int) -> Optional[float]:
    if raw in ("", NA):
        return None
    try:
        value = float(raw)
    except ValueError:
        raise CohortFormatError(f"risk factor value '{raw}' is not a number", line)
    if not np.isfinite(value):
        raise CohortFormatError(f"risk factor value '{raw}' is not finite", line)
    return value


def _parse_med(raw: str, line: int) -> MedStatus:
    if raw == NA:
        return MedStatus.MISSING
    if raw in ("0", "1"):
        return MedStatus(int(raw))
    raise CohortFormatError(f"medication status '{raw}' must be 0, 1 or NA", line)


def _parse_enum(enum_cls, raw: str, column: str, line: int):
    try:
        return enum_cls(raw)
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        raise CohortFormatError(f"{column} '{raw}' not in {{{allowed}}}", line)


class CohortService:
    """Reading, checking and writing cohorts"""

    @staticmethod
    def load_cohort(path: Path, label: Optional[str] = None, sex: Optional[Sex] = None) -> Cohort:
        """Parse a cohort CSV (one row per visit) and validate it"""
        path = Path(path)
        try:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
        except FileNotFoundError:
            raise CohortFormatError(f"cohort file not found: {path}")
        except pd.errors.EmptyDataError:
            raise CohortFormatError("empty file, header required", 1)

        missing = [c for c in COLUMNS if c not in frame.columns]
        extra = [c for c in frame.columns if c not in COLUMNS]
        if missing or extra:
            raise CohortFormatError(f"header must be {','.join(COLUMNS)} (missing {missing}, unexpected {extra})", 1)

        rows: "OrderedDict[str, dict]" = OrderedDict()
        for offset, record in enumerate(frame.itertuples(index=False)):
            line = offset + 2
            row = {c: str(getattr(record, c)).strip() for c in COLUMNS}
            if not row["id"]:
                raise CohortFormatError("empty subject id", line)

            covariates = Covariates(
                education=_parse_enum(Education, row["education"], "education", line),
                race=_parse_enum(Race, row["race"], "race", line),
                sex=_parse_enum(Sex, row["sex"], "sex", line),
            )
            try:
                event_time = float(row["event_time"])
            except ValueError:
                raise CohortFormatError(f"event_time '{row['event_time']}' is not a number", line)
            if row["event_indicator"] not in ("0", "1"):
                raise CohortFormatError(f"event_indicator '{row['event_indicator']}' must be 0 or 1", line)
            indicator = int(row["event_indicator"])
            visit = Visit(age=_parse_age(row["age"], line), y=_parse_y(row["y"], line),
                          med=_parse_med(row["med"], line))

            entry = rows.get(row["id"])
            if entry is None:
                rows[row["id"]] = {"covariates": covariates, "event_time": event_time,
                                   "event_indicator": indicator, "visits": [visit]}
                continue
            if entry["covariates"] != covariates:
                raise CohortFormatError(f"subject {row['id']}: covariates differ between rows", line)
            if entry["event_time"] != event_time or entry["event_indicator"] != indicator:
                raise CohortFormatError(f"subject {row['id']}: event_time/event_indicator differ between rows", line)
            entry["visits"].append(visit)

        subjects = tuple(
            Subject(id=sid, covariates=e["covariates"], visits=tuple(e["visits"]),
                    event_time=e["event_time"], event_indicator=e["event_indicator"])
            for sid, e in rows.items()
        )
        cohort = Cohort(subjects=subjects, label=label or path.stem)
        if sex is not None:
            cohort = CohortService.filter_by_sex(cohort, sex)

        CohortService.check(cohort)
        logger.info(f"Loaded cohort '{cohort.label}': {len(cohort)} subjects, "
                    f"{sum(s.n_visits for s in cohort)} visits")
        return cohort

    @staticmethod
    def validate(cohort: Cohort) -> List[ValidationIssue]:
        """Exhaustive invariant report; errors block fitting, warnings do not"""
        issues: List[ValidationIssue] = []
        if len(cohort) == 0:
            return [_error("no subjects")]

        seen = set()
        for subject in cohort:
            sid = subject.id
            if sid in seen:
                issues.append(_error("duplicate subject id", sid))
            seen.add(sid)

            if subject.n_visits == 0:
                issues.append(_error("no visits", sid))
                continue

            ages = [v.age for v in subject.visits]
            out_of_range = [a for a in ages if not MIN_AGE <= a <= MAX_AGE]
            if out_of_range:
                issues.append(_error("visit age outside [40, 110]", sid, f"ages {out_of_range}"))
            if any(b <= a for a, b in zip(ages, ages[1:])):
                issues.append(_error("non-increasing ages", sid, f"ages {ages}"))
            if any(v.y is not None and not np.isfinite(v.y) for v in subject.visits):
                issues.append(_error("non-finite risk factor", sid))
            if not np.isfinite(subject.event_time) or subject.event_time < ages[-1]:
                issues.append(_error("event_time before last visit age", sid,
                                     f"event_time {subject.event_time}, last visit {ages[-1]}"))
            if subject.event_indicator not in (0, 1):
                issues.append(_error("event_indicator must be 0 or 1", sid))

            statuses = subject.statuses
            if all(not m.observed for m in statuses):
                issues.append(_warning("no observed medication status", sid))
            else:
                if not statuses[0].observed:
                    issues.append(_warning("missing medication status at first visit", sid,
                                           "imputed from the medication model"))
                if subject.n_visits > 1 and not statuses[-1].observed:
                    issues.append(_warning("missing medication status at last visit", sid,
                                           "imputed from the transition model"))
        return issues

    @staticmethod
    def check(cohort: Cohort) -> List[ValidationIssue]:
        """Run validate, log warnings and raise on errors"""
        issues = CohortService.validate(cohort)
        for issue in issues:
            if not issue.is_error:
                logger.warning(f"Cohort warning: {issue}")
        errors = [issue for issue in issues if issue.is_error]
        if errors:
            raise CohortValidationError(errors)
        return issues

    @staticmethod
    def to_frame(cohort: Cohort) -> pd.DataFrame:
        """Canonical one-row-per-visit frame (sorted by id, then age), all values as text"""
        records = []
        for subject in sorted(cohort, key=lambda s: s.id):
            cov = subject.covariates
            for visit in sorted(subject.visits, key=lambda v: v.age):
                records.append({
                    "id": subject.id,
                    "sex": cov.sex.value,
                    "education": cov.education.value,
                    "race": cov.race.value,
                    "age": str(visit.age),
                    "y": NA if visit.y is None else _fmt(visit.y),
                    "med": NA if not visit.med.observed else str(int(visit.med)),
                    "event_time": _fmt(subject.event_time),
                    "event_indicator": str(subject.event_indicator),
                })
        return pd.DataFrame.from_records(records, columns=COLUMNS)

    @staticmethod
    def save_cohort(cohort: Cohort, path: Path) -> Path:
        """Write the canonical CSV; load_cohort(save_cohort(c)) reproduces c up to ordering"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        CohortService.to_frame(cohort).to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
        logger.info(f"Saved cohort '{cohort.label}' ({len(cohort)} subjects) to {path}")
        return path

    @staticmethod
    def filter_by_sex(cohort: Cohort, sex: Sex) -> Cohort:
        sex = Sex(sex)
        kept = tuple(s for s in cohort if s.covariates.sex is sex)
        return Cohort(subjects=kept, label=f"{cohort.label}-{sex.value.lower()}")

    @staticmethod
    def medication_pattern(subject: Subject) -> str:
        """never / always / on_off over the observed statuses (missing ignored)"""
        observed = {int(m) for m in subject.statuses if m.observed}
        if observed == {0} or not observed:
            return NEVER
        if observed == {1}:
            return ALWAYS
        return ON_OFF

    @staticmethod
    def pattern_frequencies(cohort: Cohort) -> pd.DataFrame:
        patterns = pd.Series([CohortService.medication_pattern(s) for s in cohort], dtype=str)
        counts = patterns.value_counts().reindex([NEVER, ALWAYS, ON_OFF], fill_value=0)
        total = max(len(cohort), 1)
        return pd.DataFrame({"pattern": counts.index, "count": counts.values,
                             "percent": 100.0 * counts.values / total})

    @staticmethod
    def is_fully_observed_constant(subject: Subject) -> bool:
        """Every visit status observed and all equal (always on or never on)"""
        statuses = subject.statuses
        return all(m.observed for m in statuses) and len({int(m) for m in statuses}) == 1


def load_cohort(path: Path, label: Optional[str] = None, sex: Optional[Sex] = None) -> Cohort:
    return CohortService.load_cohort(path, label=label, sex=sex)


def validate(cohort: Cohort) -> List[ValidationIssue]:
    return CohortService.validate(cohort)


def save_cohort(cohort: Cohort, path: Path) -> Path:
    return CohortService.save_cohort(cohort, path)

