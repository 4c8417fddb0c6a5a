"""
Log prior densities, in the natural parametrization of each parameter
"""

import numpy as np
from scipy.stats import gamma, halfnorm, invwishart, norm

from app.models.parameters import Parameters
from app.models.schemas import ModelOptions, PriorSpec


def normal_logprior(values, sd: float) -> float:
    return float(np.sum(norm.logpdf(np.asarray(values, dtype=float), loc=0.0, scale=sd)))


def half_normal_logprior(value: float, sd: float) -> float:
    return float(halfnorm.logpdf(value, scale=sd))


def sigma_logprior(sigma: np.ndarray, priors: PriorSpec) -> float:
    return float(invwishart.logpdf(sigma, df=priors.iw_df, scale=priors.iw_scale * np.eye(2)))


def omega_logprior(omega: float, priors: PriorSpec) -> float:
    """Gamma prior on 1/omega, or on 1/omega^2 when `omega_prior_on` is "precision", as a density in omega"""
    if omega <= 0:
        return -np.inf
    power = 2.0 if priors.omega_prior_on == "precision" else 1.0
    value = gamma.logpdf(omega ** -power, a=priors.omega_inv_shape, scale=1.0 / priors.omega_inv_rate)
    return float(value + np.log(power) - (power + 1.0) * np.log(omega))


def beta_logprior(params: Parameters, priors: PriorSpec) -> float:
    lon = params.longitudinal
    return normal_logprior(np.r_[lon.beta, lon.beta_m], priors.coef_sd)


def alpha_logprior(params: Parameters, priors: PriorSpec) -> float:
    return normal_logprior(params.medication.alpha, priors.coef_sd)


def hazard_logprior(params: Parameters, priors: PriorSpec, options: ModelOptions) -> float:
    haz = params.hazard
    value = normal_logprior(np.r_[haz.kappa0, haz.kappa], priors.kappa_sd)
    value += normal_logprior(np.r_[haz.beta_h, haz.lambda_m], priors.coef_sd)
    if options.include_risk_factor_feature:
        value += normal_logprior(haz.lambda_mu, priors.coef_sd)
    return value


def log_prior(params: Parameters, priors: PriorSpec, options: ModelOptions) -> float:
    """Joint log prior of every parameter the options mark as unknown"""
    lon, med, haz = params.longitudinal, params.medication, params.hazard
    value = beta_logprior(params, priors)
    value += omega_logprior(lon.omega, priors)
    value += sigma_logprior(lon.sigma, priors)
    value += alpha_logprior(params, priors)
    value += hazard_logprior(params, priors, options)
    if options.sample_skewness:
        value += normal_logprior(lon.nu, priors.nu_sd)
    if options.estimate_decay:
        value += half_normal_logprior(med.decay, priors.decay_sd)
    if options.sample_staleness:
        value += half_normal_logprior(haz.rho_mu, priors.staleness_sd)
        value += half_normal_logprior(haz.rho_m, priors.staleness_sd)
    return float(value)
