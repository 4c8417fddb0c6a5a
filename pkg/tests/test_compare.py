import numpy as np
import pandas as pd
import pytest

from app.core.exceptions import ResultsError
from app.models.domain import Sex
from app.models.parameters import default_parameters
from app.models.schemas import FitConfig, SimulationConfig
from app.services.compare import compare_fits, compare_hazards, med_years_crosstab
from app.services.results import ResultsStore
from app.services.sampler import run_fit
from app.services.simulator import simulate_cohort, simulation_basis
from tests.factories import NA, make_cohort, make_subject


@pytest.fixture
def cohort():
    return make_cohort(
        make_subject("1", meds=(0, NA, 1), event_indicator=1),
        make_subject("2", meds=(1, 1, 1), event_indicator=1),
        make_subject("3", meds=(1, 0, 0), event_indicator=0, event_time=90.0),
    )


def years(values, n_draws=4):
    return pd.DataFrame({sid: [v] * n_draws for sid, v in values.items()})


def test_identical_fits_are_never_higher(cohort, rng):
    hazard = pd.DataFrame(rng.normal(-4.0, 0.3, size=(50, 2)), columns=["1", "2"])
    med = years({"1": 2.0, "2": 5.0, "3": 1.0}, 50)
    report = compare_hazards(hazard, hazard.copy(), cohort, med, med.copy())
    assert report.summary.n_decedents == 2
    assert report.summary.proportion_mean_higher == 0.0
    assert report.summary.proportion_draws_above_half == 0.0
    assert report.per_subject["exceedance"].tolist() == [0.0, 0.0]


def test_always_higher_decedent(cohort):
    jm = pd.DataFrame({"1": [-3.0, -2.5, -2.0], "2": [-4.0, -4.0, -4.0]})
    lo = pd.DataFrame({"1": [-3.5, -3.0, -2.6], "2": [-4.0, -4.0, -4.0]})
    med = years({"1": 2.0, "2": 5.0, "3": 1.0}, 3)
    report = compare_hazards(jm, lo, cohort, med, med)
    row = report.per_subject.set_index("id").loc["1"]
    assert row["exceedance"] == 1.0
    assert row["jmrmt_mean_hazard"] == pytest.approx(np.exp([-3.0, -2.5, -2.0]).mean())
    assert report.summary.proportion_mean_higher == pytest.approx(0.5)


def test_filtered_set_drops_constant_observed_subjects(cohort):
    jm = pd.DataFrame({"1": [-3.0, -2.0], "2": [-3.0, -3.0]})
    lo = pd.DataFrame({"1": [-3.5, -3.0], "2": [-4.0, -4.0]})
    med = years({"1": 2.0, "2": 5.0, "3": 1.0}, 2)
    report = compare_hazards(jm, lo, cohort, med, med)
    assert report.per_subject["filtered"].tolist() == [True, False]
    assert report.summary.n_filtered == 1
    assert report.summary.filtered_proportion_mean_higher == 1.0
    assert report.summary.proportion_mean_higher == 1.0


def test_needs_a_decedent():
    cohort = make_cohort(make_subject("1", event_indicator=0, event_time=90.0))
    empty = pd.DataFrame()
    med = years({"1": 0.0})
    with pytest.raises(ResultsError):
        compare_hazards(empty, empty, cohort, med, med)


def test_draw_counts_must_match(cohort):
    jm = pd.DataFrame({"1": [-3.0, -2.0, -1.0], "2": [-3.0, -3.0, -3.0]})
    lo = pd.DataFrame({"1": [-3.5, -3.0], "2": [-4.0, -4.0]})
    med = years({"1": 2.0, "2": 5.0, "3": 1.0}, 2)
    with pytest.raises(ResultsError):
        compare_hazards(jm, lo, cohort, med, med)


def test_missing_subject_columns(cohort):
    jm = pd.DataFrame({"1": [-3.0]})
    med = years({"1": 2.0, "2": 5.0, "3": 1.0}, 1)
    with pytest.raises(ResultsError):
        compare_hazards(jm, jm, cohort, med, med)


def test_crosstab_is_diagonal_when_models_agree():
    values = pd.Series([0.0, 2.0, 2.0, 4.0])
    table = med_years_crosstab(values, values.copy())
    assert (np.diag(table.to_numpy()) == [1, 2, 1]).all()
    assert table.to_numpy().sum() == np.trace(table.to_numpy())


def test_zero_years_shares(cohort):
    hazard = pd.DataFrame({"1": [-3.0], "2": [-3.0]})
    jm_med = years({"1": 0.0, "2": 3.0, "3": 0.0}, 1)
    lo_med = years({"1": 0.0, "2": 3.0, "3": 2.0}, 1)
    report = compare_hazards(hazard, hazard, cohort, jm_med, lo_med)
    assert report.summary.zero_med_years_jmrmt == pytest.approx(2.0 / 3.0)
    assert report.summary.zero_med_years_locf == pytest.approx(1.0 / 3.0)


def test_rounding_differences_count_as_ties(cohort, rng):
    values = rng.normal(-4.0, 0.3, size=(40, 2))
    jm = pd.DataFrame(values, columns=["1", "2"])
    lo = pd.DataFrame(np.asfortranarray(np.nextafter(values, -np.inf)), columns=["1", "2"])
    med = years({"1": 2.0, "2": 5.0, "3": 1.0}, 40)
    report = compare_hazards(jm, lo, cohort, med, med)
    assert report.summary.proportion_mean_higher == 0.0
    assert report.per_subject["exceedance"].tolist() == [0.0, 0.0]


def fit_both(cohort, tmp_path, jobs=1, **flat):
    fits = {}
    for model in ("jmrmt", "locf"):
        config = FitConfig.from_flat({**flat, "model": model})
        run_fit(cohort, config, output_dir=tmp_path / model, jobs=jobs, quiet=True)
        fits[model] = ResultsStore.load_fit(tmp_path / model)
    return fits["jmrmt"], fits["locf"]


@pytest.mark.slow
def test_posterior_medication_years_against_carry_forward(tmp_path):
    # 1 switches off and 2 switches on somewhere in a six-year gap; carry-forward puts both switches at 71
    cohort = make_cohort(
        make_subject("1", ages=(65, 71), meds=(1, 0), event_time=78.0, event_indicator=0),
        make_subject("2", ages=(65, 71), meds=(0, 1), event_time=78.0, event_indicator=0),
        make_subject("3", ages=(66, 68, 70), meds=(0, NA, 1), event_time=72.5, event_indicator=1),
        make_subject("4", ages=(65, 67, 69), meds=(1, 1, 1), event_time=74.0, event_indicator=1),
    )
    jm, lo = fit_both(cohort, tmp_path, n_chains=2, n_iter=1500, n_burnin=500, seed=21)
    jm_years = jm.pooled(jm.med_years).mean()
    lo_years = lo.pooled(lo.med_years)
    assert lo_years.nunique().max() == 1
    lo_years = lo_years.iloc[0]
    assert jm_years["1"] < lo_years["1"]
    assert jm_years["2"] > lo_years["2"]
    assert jm_years["4"] == pytest.approx(lo_years["4"])

    report = compare_fits(jm, lo, cohort)
    assert report.summary.n_decedents == 2
    assert not report.per_subject.set_index("id").loc["4", "filtered"]


@pytest.mark.slow
def test_simulated_switching_raises_the_hazard_at_death(tmp_path):
    config = SimulationConfig(n=300, missing_rate=0.1, seed=2718)
    params = default_parameters(Sex.MEN, n_basis=simulation_basis(config).n_basis)
    cohort = simulate_cohort(params, config).cohort
    jm, lo = fit_both(cohort, tmp_path, jobs=2, n_chains=2, n_iter=2000, n_burnin=1000, seed=31)
    report = compare_fits(jm, lo, cohort)
    assert report.summary.n_filtered > 0
    assert report.summary.filtered_proportion_draws_above_half > 0.5
