import numpy as np
import pytest

from app.core.exceptions import NumericDomainError
from app.models.parameters import HazardParams
from app.services.survival import (
    EventDesign, FeaturePath, cumulative_hazard, event_loglik, integration_pieces, log_hazard, quadrature_nodes,
    staleness,
)


def constant_hazard(rate: float, n_basis: int = 4, **changes) -> HazardParams:
    values = dict(kappa0=np.log(rate), kappa=np.zeros(n_basis), beta_h=np.zeros(3), lambda_mu=0.0, lambda_m=0.0)
    values.update(changes)
    return HazardParams(**values)


@pytest.fixture
def varying_path():
    """Risk feature rising with age, medication feature accruing after 68, last visit 72"""
    return FeaturePath(
        x=np.array([1.0, 0.0, 1.0]),
        last_age=72.0,
        g_mu=lambda t: 150.0 + 0.5 * (np.minimum(t, 72.0) - 65.0),
        g_m=lambda t: np.clip(np.minimum(t, 72.0) - 68.0, 0.0, None),
        breakpoints=(67.0, 68.0),
    )


def test_constant_hazard_cumulative(basis):
    path = FeaturePath.constant(np.zeros(3), 70.0, 0.0, 0.0)
    assert cumulative_hazard(constant_hazard(0.02), basis, path, 65.0, 75.0) == pytest.approx(0.2, abs=1e-10)


def test_event_loglik_exponential(basis):
    path = FeaturePath.constant(np.zeros(3), 70.0, 0.0, 0.0)
    params = constant_hazard(0.02)
    assert event_loglik(params, basis, path, 75.0, 1, 65.0) == pytest.approx(np.log(0.02) - 0.2, abs=1e-10)
    assert event_loglik(params, basis, path, 75.0, 0, 65.0) == pytest.approx(-0.2, abs=1e-10)


def test_covariate_effects_multiply_the_hazard(basis):
    path = FeaturePath.constant(np.array([0.0, 1.0, 1.0]), 70.0, 0.0, 0.0)
    params = constant_hazard(0.01, beta_h=np.array([5.0, 0.2, 0.3]))
    assert log_hazard(params, basis, path, 68.0) == pytest.approx(np.log(0.01) + 0.5)


def test_staleness_discount():
    assert staleness(0.1, 72.0, 70.0) == pytest.approx(np.exp(-0.2))
    assert staleness(0.1, 69.0, 70.0) == 1.0


def test_features_discounted_after_last_visit(basis):
    path = FeaturePath.constant(np.zeros(3), 70.0, 2.0, 3.0)
    params = constant_hazard(0.02, lambda_mu=0.5, lambda_m=-0.25, rho_mu=0.1, rho_m=0.2)
    before = log_hazard(params, basis, path, 69.0) - np.log(0.02)
    after = log_hazard(params, basis, path, 75.0) - np.log(0.02)
    assert before == pytest.approx(0.5 * 2.0 - 0.25 * 3.0)
    assert after == pytest.approx(0.5 * 2.0 * np.exp(-0.5) - 0.25 * 3.0 * np.exp(-1.0))


def test_integration_pieces():
    assert integration_pieces(65.0, 75.0, [60.0, 67.0, 68.0, 75.0, 70.0]).tolist() == [65.0, 67.0, 68.0, 70.0, 75.0]


def test_reversed_bounds(basis):
    path = FeaturePath.constant(np.zeros(3), 70.0, 0.0, 0.0)
    with pytest.raises(NumericDomainError):
        cumulative_hazard(constant_hazard(0.02), basis, path, 75.0, 65.0)
    with pytest.raises(NumericDomainError):
        event_loglik(constant_hazard(0.02), basis, path, 64.0, 1, 65.0)


class TestEventDesign:
    def test_matches_direct_evaluation(self, basis, varying_path):
        params = HazardParams(kappa0=-4.0, kappa=np.array([0.1, 0.4, -0.2, 0.3]), beta_h=np.array([0.2, 0.1, 0.3]),
                              lambda_mu=0.004, lambda_m=-0.3, rho_mu=0.1, rho_m=0.2)
        design = EventDesign.build(basis, varying_path, 65.0, 78.5, 1)
        direct = event_loglik(params, basis, varying_path, 78.5, 1, 65.0)
        assert design.loglik(params) == pytest.approx(direct, abs=1e-10)
        assert design.log_hazard_at_event(params) == pytest.approx(log_hazard(params, basis, varying_path, 78.5))

    def test_nodes_do_not_depend_on_feature_values(self, basis, varying_path):
        design = EventDesign.build(basis, varying_path, 65.0, 78.5, 0)
        nodes, weights = quadrature_nodes(65.0, 78.5, (*varying_path.breakpoints, varying_path.last_age))
        np.testing.assert_array_equal(design.nodes, nodes)
        assert weights.sum() == pytest.approx(13.5)
        assert len(nodes) == 4 * 15

    def test_overflowing_hazard_gives_minus_infinity(self, basis, varying_path):
        design = EventDesign.build(basis, varying_path, 65.0, 78.5, 0)
        params = constant_hazard(1.0, kappa0=800.0)
        assert design.cumulative_hazard(params) == np.inf
        assert design.loglik(params) == -np.inf
