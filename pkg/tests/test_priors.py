import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import gamma

from app.models.schemas import PriorSpec
from app.services.priors import omega_logprior


@pytest.mark.parametrize("prior_on", ["inverse_scale", "precision"])
def test_omega_prior_is_a_density_in_omega(prior_on):
    priors = PriorSpec(omega_inv_shape=2.0, omega_inv_rate=3.0, omega_prior_on=prior_on)
    total, _ = quad(lambda w: np.exp(omega_logprior(w, priors)), 0.0, np.inf)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_default_places_the_gamma_on_the_inverse_scale():
    priors = PriorSpec(omega_inv_shape=2.0, omega_inv_rate=3.0)
    for omega in (0.2, 1.0, 4.5):
        expected = gamma.logpdf(1.0 / omega, a=2.0, scale=1.0 / 3.0) - 2.0 * np.log(omega)
        assert omega_logprior(omega, priors) == pytest.approx(expected, rel=1e-12)


def test_mean_of_the_inverse_scale_matches_the_gamma():
    priors = PriorSpec(omega_inv_shape=3.0, omega_inv_rate=2.0)
    mean, _ = quad(lambda w: np.exp(omega_logprior(w, priors)) / w, 0.0, np.inf)
    assert mean == pytest.approx(1.5, rel=1e-6)


def test_non_positive_scale_has_no_mass():
    assert omega_logprior(0.0, PriorSpec()) == -np.inf
    assert omega_logprior(-1.0, PriorSpec()) == -np.inf
