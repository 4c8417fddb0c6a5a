"""
Risk-factor submodel: subject-specific mean trajectory on and off medication
with random intercept and age slope, skew-normal measurement error
"""

import numpy as np
from scipy.stats import multivariate_normal

from app.core.exceptions import ContractViolation, NumericDomainError
from app.models.domain import Covariates, Visit
from app.models.parameters import LongitudinalParams
from app.services.numerics import skew_normal_logpdf


def _coefficients(params: LongitudinalParams, covariates: Covariates, b) -> tuple:
    x = covariates.design()
    beta = params.beta
    intercept = beta[0] + beta[1:4] @ x + b[0]
    slope = beta[4] + beta[5:8] @ x + b[1]
    return intercept, slope


def mu_off_med(params: LongitudinalParams, covariates: Covariates, b, age_centered):
    """Off-medication trajectory at centered age(s)"""
    intercept, slope = _coefficients(params, covariates, np.asarray(b, dtype=float))
    return intercept + slope * np.asarray(age_centered, dtype=float)


def mu(params: LongitudinalParams, covariates: Covariates, b, age_centered, med):
    """Mean trajectory; medication shifts the age slope by beta_m"""
    age_centered = np.asarray(age_centered, dtype=float)
    med = np.asarray(med, dtype=float)
    if np.any((med != 0) & (med != 1)):
        raise ContractViolation(f"medication status must be resolved to 0/1, got {med}")
    return mu_off_med(params, covariates, b, age_centered) + params.beta_m * age_centered * med


def y_loglik(params: LongitudinalParams, covariates: Covariates, b, visit: Visit, age_center: float) -> float:
    """Skew-normal log-density of one visit's risk factor given its own status only"""
    if not visit.med.observed:
        raise ContractViolation(f"visit at age {visit.age} has unresolved medication status")
    if visit.y is None:
        raise ContractViolation(f"visit at age {visit.age} has no risk factor value")
    location = mu(params, covariates, b, visit.age - age_center, int(visit.med))
    return float(skew_normal_logpdf(visit.y, location, params.omega, params.nu))


def check_sigma(sigma: np.ndarray):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (2, 2) or not np.allclose(sigma, sigma.T):
        raise NumericDomainError("random-effects covariance must be a symmetric 2x2 matrix")
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise NumericDomainError("random-effects covariance is not positive definite")


def random_effects_logpdf(b, sigma: np.ndarray) -> float:
    return float(multivariate_normal.logpdf(np.asarray(b, dtype=float), mean=np.zeros(2), cov=sigma))


def sample_random_effects(sigma: np.ndarray, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    """Draws b ~ N(0, sigma), shape (size, 2)"""
    check_sigma(sigma)
    return rng.multivariate_normal(np.zeros(2), sigma, size=size)
