import numpy as np
import pytest

from app.core.exceptions import ContractViolation, NumericDomainError
from app.models.domain import MedStatus, Visit
from app.services.longitudinal import (
    check_sigma, mu, mu_off_med, random_effects_logpdf, sample_random_effects, y_loglik,
)
from app.services.numerics import skew_normal_logpdf
from tests.factories import make_subject


@pytest.fixture
def covariates():
    return make_subject().covariates


def test_off_medication_trajectory(flat_params, covariates):
    lon = flat_params.longitudinal
    assert mu_off_med(lon, covariates, np.array([1.0, 0.5]), 2.0) == pytest.approx(2.0)


def test_medication_changes_the_slope(flat_params, covariates):
    lon = flat_params.with_longitudinal(beta_m=-1.0).longitudinal
    b = np.array([1.0, 0.5])
    assert mu(lon, covariates, b, 2.0, 0) == pytest.approx(2.0)
    assert mu(lon, covariates, b, 2.0, 1) == pytest.approx(0.0)


def test_fixed_effects_follow_covariate_contrasts(flat_params, covariates):
    beta = np.array([100.0, 5.0, 7.0, 11.0, 1.0, 0.5, 0.25, 0.125])
    lon = flat_params.with_longitudinal(beta=beta).longitudinal
    # education HS, non-Black: intercept 100 + 5, slope 1 + 0.5
    assert mu(lon, covariates, np.zeros(2), 4.0, 0) == pytest.approx(105.0 + 1.5 * 4.0)


def test_unresolved_status_rejected(flat_params, covariates):
    with pytest.raises(ContractViolation):
        mu(flat_params.longitudinal, covariates, np.zeros(2), 0.0, -1)


def test_y_loglik(flat_params, covariates):
    visit = Visit(age=67, y=3.0, med=MedStatus.OFF)
    expected = skew_normal_logpdf(3.0, 0.0, 5.0, flat_params.longitudinal.nu)
    assert y_loglik(flat_params.longitudinal, covariates, np.zeros(2), visit, 65.0) == pytest.approx(expected)


def test_y_loglik_needs_status_and_value(flat_params, covariates):
    with pytest.raises(ContractViolation):
        y_loglik(flat_params.longitudinal, covariates, np.zeros(2), Visit(67, 3.0, MedStatus.MISSING), 65.0)
    with pytest.raises(ContractViolation):
        y_loglik(flat_params.longitudinal, covariates, np.zeros(2), Visit(67, None, MedStatus.ON), 65.0)


def test_random_effects_density():
    assert random_effects_logpdf(np.zeros(2), np.eye(2)) == pytest.approx(-np.log(2.0 * np.pi))


def test_sigma_must_be_positive_definite():
    with pytest.raises(NumericDomainError):
        check_sigma(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(NumericDomainError):
        check_sigma(np.eye(3))


def test_sample_random_effects_moments(rng):
    sigma = np.array([[4.0, 0.5], [0.5, 1.0]])
    draws = sample_random_effects(sigma, rng, size=20000)
    assert draws.shape == (20000, 2)
    np.testing.assert_allclose(np.cov(draws.T), sigma, atol=0.15)
