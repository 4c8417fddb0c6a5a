import pytest

from app.core.exceptions import ResultsError
from app.models.domain import Sex
from app.models.parameters import default_parameters
from app.services.results import ResultsStore


def test_written_parameters_load_back(tmp_path):
    params = default_parameters(Sex.MEN, n_basis=4).with_hazard(kappa0=0.25)
    path = tmp_path / "params.json"
    ResultsStore.write_json(params.to_flat(), path)
    loaded = ResultsStore.load_parameters(path, Sex.MEN, n_basis=4)
    assert loaded.to_flat() == pytest.approx(params.to_flat())


def test_parameters_for_another_basis_are_rejected(tmp_path):
    path = tmp_path / "params.json"
    ResultsStore.write_json(default_parameters(Sex.MEN, n_basis=6).to_flat(), path)
    with pytest.raises(ResultsError, match="6 spline coefficients"):
        ResultsStore.load_parameters(path, Sex.MEN, n_basis=4)


def test_partial_file_overrides_defaults(tmp_path):
    path = tmp_path / "params.json"
    ResultsStore.write_json({"longitudinal.omega": 7.5}, path)
    loaded = ResultsStore.load_parameters(path, Sex.WOMEN, n_basis=4)
    expected = default_parameters(Sex.WOMEN, n_basis=4).to_flat()
    expected["longitudinal.omega"] = 7.5
    assert loaded.to_flat() == pytest.approx(expected)


def test_missing_parameter_file(tmp_path):
    with pytest.raises(ResultsError):
        ResultsStore.load_parameters(tmp_path / "absent.json")
