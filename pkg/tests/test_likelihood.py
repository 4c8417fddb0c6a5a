import numpy as np
import pytest
from scipy.special import logsumexp

from app.core.exceptions import ContractViolation, IntractableInstanceError
from app.models.domain import AugmentedState
from app.models.schemas import ModelOptions, PriorSpec
from app.services import priors as prior_density
from app.services.likelihood import (
    SubjectData, feature_path, subject_components, subject_loglik, subject_timeline,
)
from app.services.oracle import (
    configuration_logweights, configuration_probabilities, enumerate_augmentations, observed_loglik,
)
from app.services.sampler import complete_data_logpost
from tests.factories import NA, make_cohort, make_subject

B = np.array([3.0, -0.2])


def state(statuses, switches=None, b=B):
    return AugmentedState(b=np.asarray(b, dtype=float), statuses=tuple(statuses), switch_ages=dict(switches or {}))


class TestSubjectLikelihood:
    def test_components_add_up(self, men_params, spec):
        subject = make_subject(meds=(0, 1, 1))
        comps = subject_components(men_params, spec, SubjectData.from_subject(subject), state((0, 1, 1), {1: 66}))
        total = comps.longitudinal + comps.medication + comps.switching + comps.initial + comps.event
        assert comps.total == pytest.approx(total)
        assert comps.switching < 0.0
        assert comps.initial == 0.0

    def test_no_latent_terms_without_augmentation(self, men_params, locf_spec):
        subject = make_subject(meds=(NA, 1, 1))
        comps = subject_components(men_params, locf_spec, SubjectData.from_subject(subject), state((1, 1, 1)))
        assert comps.switching == 0.0
        assert comps.initial == 0.0

    def test_initial_term_only_for_missing_first_status(self, men_params, spec):
        subject = make_subject(meds=(NA, 1, 1))
        comps = subject_components(men_params, spec, SubjectData.from_subject(subject), state((1, 1, 1)))
        assert comps.initial < 0.0

    def test_contradicting_observed_status(self, men_params, spec):
        subject = make_subject(meds=(0, 1, 1))
        with pytest.raises(ContractViolation):
            subject_loglik(men_params, spec, SubjectData.from_subject(subject), state((1, 1, 1)))

    def test_switch_map_must_cover_intervals(self, men_params, spec):
        subject = make_subject(meds=(0, 1, 1))
        with pytest.raises(ContractViolation):
            subject_loglik(men_params, spec, SubjectData.from_subject(subject), state((0, 1, 1)))

    def test_feature_path_reads_timeline(self, men_params, spec):
        data = SubjectData.from_subject(make_subject(ages=(65, 69), meds=(1, 0)))
        timeline = subject_timeline(data, state((1, 0), {1: 67}))
        path = feature_path(men_params, data, B, timeline, spec.age_center)
        assert path.g_m(np.array([80.0]))[0] == pytest.approx(2.0)
        assert path.breakpoints == (65.0, 66.0, 67.0, 68.0, 69.0)
        # frozen at the last visit
        assert path.g_mu(np.array([69.0]))[0] == pytest.approx(path.g_mu(np.array([90.0]))[0])


class TestOracle:
    def test_configuration_count(self):
        assert len(enumerate_augmentations(make_subject(meds=(0, NA, 1)))) == 4
        assert len(enumerate_augmentations(make_subject(ages=(65, 68), meds=(NA, 1)))) == 4
        assert len(enumerate_augmentations(make_subject(meds=(0, 0, 0)))) == 1

    def test_no_latent_variables_equals_complete_data(self, men_params, spec):
        subject = make_subject(meds=(0, 0, 0))
        direct = subject_loglik(men_params, spec, SubjectData.from_subject(subject), state((0, 0, 0)))
        assert observed_loglik(men_params, spec, subject, B) == pytest.approx(direct, abs=1e-8)

    def test_observed_is_logsumexp_of_configurations(self, men_params, spec):
        subject = make_subject(meds=(1, NA, 0))
        weights = configuration_logweights(men_params, spec, subject, B)
        assert observed_loglik(men_params, spec, subject, B) == pytest.approx(logsumexp(list(weights.values())))

    def test_probabilities_sum_to_one(self, men_params, spec):
        probs = configuration_probabilities(men_params, spec, make_subject(ages=(65, 68, 70), meds=(NA, 1, NA)), B)
        assert sum(probs.values()) == pytest.approx(1.0)
        assert all(p >= 0 for p in probs.values())

    def test_switch_distribution_normalizes_without_event_term(self, flat_params, spec):
        # with lambda_m = 0 the event factor is the same for every switch age
        subject = make_subject(ages=(65, 69), meds=(0, 1))
        probs = configuration_probabilities(flat_params, spec, subject, np.zeros(2))
        assert len(probs) == 4
        assert list(probs.values()) == pytest.approx([0.25] * 4)

    def test_refuses_large_instances(self):
        with pytest.raises(IntractableInstanceError):
            enumerate_augmentations(make_subject(ages=(65, 66, 67, 68, 69, 70), meds=(0,) * 6))
        with pytest.raises(IntractableInstanceError):
            enumerate_augmentations(make_subject(ages=(65, 72), meds=(0, NA), event_time=80))


class TestCompleteDataLogPosterior:
    def test_empty_cohort_is_prior_only(self, men_params, spec):
        options, priors = ModelOptions(), PriorSpec()
        value = complete_data_logpost(men_params, make_cohort(), [], priors, spec, options)
        assert value == pytest.approx(prior_density.log_prior(men_params, priors, options))

    def test_duplicated_subject_doubles_its_contribution(self, men_params, spec):
        options, priors = ModelOptions(), PriorSpec()
        subject = make_subject(meds=(0, 1, 1))
        twin = make_subject("2", meds=(0, 1, 1))
        st = state((0, 1, 1), {1: 67})
        prior = prior_density.log_prior(men_params, priors, options)
        one = complete_data_logpost(men_params, make_cohort(subject), [st], priors, spec, options) - prior
        two = complete_data_logpost(men_params, make_cohort(subject, twin), [st, st], priors, spec, options) - prior
        assert two == pytest.approx(2.0 * one, rel=1e-12)
