import numpy as np
import pytest

from app.core.exceptions import ContractViolation, NumericDomainError
from app.models.parameters import MedicationParams
from app.services.medication import (
    gap_decay_curve, initial_status_logprob, med_loglik, stationary_on_prob, transition_logit, transition_prob,
)


def alpha(**values):
    a = np.zeros(8)
    for key, value in values.items():
        a[int(key[1:]) - 1] = value
    return MedicationParams(alpha=a, decay=1.0)


def test_zero_coefficients_give_even_odds():
    params = alpha()
    assert transition_prob(params, 0, 67, 65, 150.0) == pytest.approx(0.5)


def test_each_term():
    params = alpha(a1=1.0, a2=2.0, a3=0.1, a5=1.0, a8=0.01)
    # on at the previous visit, age 70 centered at 65, gap 2, g = 100
    expected = (1.0 + 2.0) + 0.1 * 5.0 + 1.0 * np.exp(-2.0) + 0.01 * 100.0
    assert transition_logit(params, 1, 70, 68, 100.0, age_center=65.0) == pytest.approx(expected)


def test_decay_rate_scales_the_gap():
    params = MedicationParams(alpha=np.r_[0, 0, 0, 0, 1.0, 0, 0, 0], decay=0.5)
    assert transition_logit(params, 0, 69, 65, 0.0) == pytest.approx(np.exp(-2.0))


def test_non_positive_gap():
    with pytest.raises(NumericDomainError):
        transition_logit(alpha(), 0, 65, 65, 0.0)


def test_med_loglik_sums_transitions():
    assert med_loglik(alpha(), [65, 67, 69], [0, 1, 1], [150.0, 150.0, 150.0]) == pytest.approx(2 * np.log(0.5))


def test_med_loglik_uses_previous_visit_feature():
    params = alpha(a7=1.0)
    # only g at the first visit enters the single transition
    value = med_loglik(params, [65, 67], [0, 1], [2.0, -50.0])
    assert value == pytest.approx(np.log(1.0 / (1.0 + np.exp(-2.0))))


def test_single_visit_has_no_transitions():
    assert med_loglik(alpha(a1=3.0), [65], [1], [0.0]) == 0.0


def test_unresolved_statuses():
    with pytest.raises(ContractViolation):
        med_loglik(alpha(), [65, 67], [0, -1], [0.0, 0.0])


def test_stationary_probability():
    assert stationary_on_prob(alpha(), 65, 0.0, 0.0) == pytest.approx(0.5)
    # p01 = 0.5 and p11 = inv_logit(2) give p01 / (p01 + 1 - p11)
    p11 = 1.0 / (1.0 + np.exp(-2.0))
    assert stationary_on_prob(alpha(a2=2.0), 65, 0.0, 0.0) == pytest.approx(0.5 / (0.5 + 1.0 - p11))


def test_initial_status_logprob_sums_to_one():
    params = alpha(a1=-1.0, a2=3.0)
    on = initial_status_logprob(params, 1, 66, 0.0, 0.0)
    off = initial_status_logprob(params, 0, 66, 0.0, 0.0)
    assert np.exp(on) + np.exp(off) == pytest.approx(1.0)


def test_gap_decay_curve():
    params = MedicationParams(alpha=np.r_[0, 0, 0, 0, -0.2, 1.6, 0, 0], decay=1.0)
    curve = gap_decay_curve(params, [0.0, 1.0])
    assert list(curve.columns) == ["gap", "off_medication", "on_medication"]
    assert curve["off_medication"].tolist() == pytest.approx([-0.2, -0.2 * np.exp(-1.0)])
    assert curve["on_medication"].tolist() == pytest.approx([1.4, 1.4 * np.exp(-1.0)])
