import numpy as np
import pytest

from app.models.domain import Sex
from app.models.parameters import default_parameters, zero_parameters
from app.services.likelihood import ModelSpec
from app.services.numerics import BSplineBasis


@pytest.fixture
def basis():
    return BSplineBasis(degree=3, interior_knots=(75.0, 85.0), lo=60.0, hi=100.0)


@pytest.fixture
def spec(basis):
    return ModelSpec(basis=basis, age_center=65.0, augment=True)


@pytest.fixture
def locf_spec(basis):
    return ModelSpec(basis=basis, age_center=65.0, augment=False)


@pytest.fixture
def men_params(basis):
    return default_parameters(Sex.MEN, n_basis=basis.n_basis)


@pytest.fixture
def flat_params(basis):
    """Zero coefficients, unit covariance, error scale 5"""
    return zero_parameters(n_basis=basis.n_basis, omega=5.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
