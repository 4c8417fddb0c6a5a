import numpy as np
import pytest

from app.core.exceptions import ContractViolation
from app.services.locf import locf_state, locf_statuses, locf_timeline, locf_years_on_med
from app.services.switching import build_timeline, years_on_med
from tests.factories import NA, make_subject


def test_carries_last_status_forward():
    subject = make_subject(ages=(65, 69), meds=(1, 0))
    assert locf_timeline(subject).status == (1, 1, 1, 1, 0)


def test_skips_missing_visits():
    subject = make_subject(ages=(65, 67, 69), meds=(1, NA, 0))
    assert locf_statuses(subject) == (1, 1, 0)
    assert locf_timeline(subject).status == (1, 1, 1, 1, 0)


def test_backfills_before_first_observation():
    subject = make_subject(ages=(65, 67, 69), meds=(NA, 0, 1))
    assert locf_statuses(subject) == (0, 0, 1)
    assert locf_timeline(subject).status == (0, 0, 0, 0, 1)


def test_needs_an_observed_status():
    with pytest.raises(ContractViolation):
        locf_timeline(make_subject(ages=(65, 67), meds=(NA, NA)))


def test_state_reproduces_the_timeline():
    subject = make_subject(ages=(65, 67, 70), meds=(0, NA, 1))
    state = locf_state(subject, np.zeros(2))
    ages = [v.age for v in subject.visits]
    assert build_timeline(ages, state.statuses, state.switch_ages) == locf_timeline(subject)


def test_years_on_med_matches_timeline_count():
    subject = make_subject(ages=(65, 68, 71), meds=(1, 0, 1))
    assert locf_years_on_med(subject) == pytest.approx(years_on_med(locf_timeline(subject), 71.0))
    assert locf_years_on_med(subject) == pytest.approx(4.0)


def test_early_switch_off_is_overestimated():
    subject = make_subject(ages=(65, 69), meds=(1, 0))
    true_years = years_on_med(build_timeline([65, 69], [1, 0], {1: 66}), 69.0)
    assert true_years == pytest.approx(1.0)
    assert locf_years_on_med(subject) == pytest.approx(4.0)
    assert locf_years_on_med(subject) >= true_years


def test_early_switch_on_is_underestimated():
    subject = make_subject(ages=(65, 69), meds=(0, 1))
    true_years = years_on_med(build_timeline([65, 69], [0, 1], {1: 66}), 69.0)
    assert true_years == pytest.approx(4.0)
    assert locf_years_on_med(subject) == pytest.approx(1.0)
    assert locf_years_on_med(subject) <= true_years


@pytest.mark.parametrize("status", [0, 1])
def test_constant_observed_medication_is_unchanged(status):
    subject = make_subject(ages=(65, 67, 70), meds=(status,) * 3)
    augmented = build_timeline([65, 67, 70], [status] * 3, {})
    assert locf_timeline(subject) == augmented
    t = np.linspace(65.0, 80.0, 31)
    np.testing.assert_array_equal(years_on_med(locf_timeline(subject), t), years_on_med(augmented, t))
