import pytest

from app.core.exceptions import CohortFormatError, CohortValidationError
from app.models.domain import MedStatus, Sex
from app.services.cohort_service import ALWAYS, NEVER, ON_OFF, CohortService
from tests.factories import NA, make_cohort, make_subject

HEADER = "id,sex,education,race,age,y,med,event_time,event_indicator\n"

GOOD_ROWS = (
    "1,Men,HS,Black,65,180.5,0,80.2,1\n"
    "1,Men,HS,Black,67,175,1,80.2,1\n"
    "2,Women,MoreHS,NonBlack,70,NA,NA,75,0\n"
    "2,Women,MoreHS,NonBlack,72,160,0,75,0\n"
)


def write(tmp_path, body: str, name: str = "cohort.csv"):
    path = tmp_path / name
    path.write_text(HEADER + body, encoding="utf-8")
    return path


class TestLoadCohort:
    def test_parses_subjects_and_visits(self, tmp_path):
        cohort = CohortService.load_cohort(write(tmp_path, GOOD_ROWS))
        assert cohort.label == "cohort"
        assert len(cohort) == 2
        first, second = cohort.subjects
        assert first.id == "1"
        assert [v.age for v in first.visits] == [65, 67]
        assert first.event_time == 80.2
        assert second.visits[0].y is None
        assert second.visits[0].med is MedStatus.MISSING

    def test_round_trip_is_byte_identical(self, tmp_path):
        cohort = CohortService.load_cohort(write(tmp_path, GOOD_ROWS))
        out = CohortService.save_cohort(cohort, tmp_path / "again.csv")
        again = CohortService.load_cohort(out)
        out2 = CohortService.save_cohort(again, tmp_path / "third.csv")
        assert out.read_bytes() == out2.read_bytes()
        assert CohortService.to_frame(cohort).equals(CohortService.to_frame(again))

    def test_bad_status_reports_line(self, tmp_path):
        body = "1,Men,HS,Black,65,180,0,80,1\n1,Men,HS,Black,67,180,2,80,1\n"
        with pytest.raises(CohortFormatError) as info:
            CohortService.load_cohort(write(tmp_path, body))
        assert info.value.line == 3

    def test_fractional_age_rejected(self, tmp_path):
        with pytest.raises(CohortFormatError) as info:
            CohortService.load_cohort(write(tmp_path, "1,Men,HS,Black,65.5,180,0,80,1\n"))
        assert info.value.line == 2

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,age\n1,65\n", encoding="utf-8")
        with pytest.raises(CohortFormatError):
            CohortService.load_cohort(path)

    def test_inconsistent_covariates(self, tmp_path):
        body = "1,Men,HS,Black,65,180,0,80,1\n1,Men,LessHS,Black,67,180,0,80,1\n"
        with pytest.raises(CohortFormatError):
            CohortService.load_cohort(write(tmp_path, body))

    def test_event_before_last_visit_is_a_validation_error(self, tmp_path):
        body = "1,Men,HS,Black,65,180,0,66,1\n1,Men,HS,Black,67,180,0,66,1\n"
        with pytest.raises(CohortValidationError) as info:
            CohortService.load_cohort(write(tmp_path, body))
        assert [issue.rule for issue in info.value.issues] == ["event_time before last visit age"]
        assert info.value.issues[0].subject_id == "1"

    def test_sex_filter(self, tmp_path):
        cohort = CohortService.load_cohort(write(tmp_path, GOOD_ROWS), sex=Sex.WOMEN)
        assert cohort.ids == ("2",)


class TestValidate:
    def test_empty_cohort(self):
        issues = CohortService.validate(make_cohort())
        assert [i.rule for i in issues] == ["no subjects"]

    def test_non_increasing_ages(self):
        issues = CohortService.validate(make_cohort(make_subject(ages=(65, 65, 69))))
        assert "non-increasing ages" in [i.rule for i in issues if i.is_error]

    def test_age_range(self):
        issues = CohortService.validate(make_cohort(make_subject(ages=(38, 40, 42), event_time=50)))
        assert "visit age outside [40, 110]" in [i.rule for i in issues]

    def test_duplicate_ids(self):
        issues = CohortService.validate(make_cohort(make_subject("7"), make_subject("7")))
        assert "duplicate subject id" in [i.rule for i in issues]

    def test_missing_statuses_are_warnings(self):
        subject = make_subject(meds=(NA, 1, NA))
        issues = CohortService.validate(make_cohort(subject))
        assert all(not i.is_error for i in issues)
        assert {i.rule for i in issues} == {
            "missing medication status at first visit",
            "missing medication status at last visit",
        }


class TestPatterns:
    def test_medication_pattern(self):
        assert CohortService.medication_pattern(make_subject(meds=(0, NA, 0))) == NEVER
        assert CohortService.medication_pattern(make_subject(meds=(1, 1, NA))) == ALWAYS
        assert CohortService.medication_pattern(make_subject(meds=(0, 1, 0))) == ON_OFF

    def test_pattern_frequencies(self):
        cohort = make_cohort(
            make_subject("1", meds=(0, 0, 0)),
            make_subject("2", meds=(1, 1, 1)),
            make_subject("3", meds=(0, 1, 1)),
            make_subject("4", meds=(0, 0, NA)),
        )
        table = CohortService.pattern_frequencies(cohort).set_index("pattern")
        assert table.loc[NEVER, "count"] == 2
        assert table.loc[ALWAYS, "count"] == 1
        assert table.loc[ON_OFF, "percent"] == pytest.approx(25.0)

    def test_fully_observed_constant(self):
        assert CohortService.is_fully_observed_constant(make_subject(meds=(1, 1, 1)))
        assert not CohortService.is_fully_observed_constant(make_subject(meds=(1, NA, 1)))
        assert not CohortService.is_fully_observed_constant(make_subject(meds=(0, 1, 1)))
