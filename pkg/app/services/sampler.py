"""
Adaptive Metropolis-within-Gibbs sampler for the joint model.

One sweep updates, in order: missing statuses, switch ages, random effects,
then the parameter blocks (fixed effects, error scale, skewness, covariance,
transition coefficients, gap decay, hazard coefficients, staleness rates).
Random-walk blocks tune their scale (Robbins-Monro) and their covariance
during burn-in only.
"""

import itertools
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.special import logsumexp
from scipy.stats import invwishart
from tqdm import tqdm

from app.core.config import settings
from app.core.exceptions import ContractViolation, NumericDomainError
from app.models.domain import AugmentedState, Cohort, MedicationTimeline, MedStatus
from app.models.parameters import BETA_NAMES, HazardParams, LongitudinalParams, MedicationParams, Parameters
from app.models.schemas import FitConfig, FitSummary, ModelOptions, ParameterSummary, PriorSpec
from app.services import priors as prior_density
from app.services.diagnostics import gelman_rubin, summarize
from app.services.likelihood import (
    ModelSpec, SubjectData, initial_term, interval_switch_log_probs, longitudinal_term, medication_term,
    subject_loglik, subject_timeline, switching_term,
)
from app.services.locf import locf_state
from app.services.longitudinal import random_effects_logpdf
from app.services.numerics import BSplineBasis, make_basis
from app.services.stacked import EVENT, TERMS, StackedCohort, random_effects_logpdfs
from app.services.switching import switching_intervals

logger = logging.getLogger(__name__)

ADAPTIVE_MIX = 0.95
OPTIMAL_SCALE = 2.38 ** 2

BETA_SD = [1.0, 1.0, 1.0, 1.0, 0.1, 0.1, 0.1, 0.1, 0.1]
ALPHA_SD = [0.2, 0.2, 0.02, 0.02, 0.2, 0.2, 0.001, 0.001]
RANDOM_EFFECT_SD = [2.0, 0.2]


class AdaptiveBlock:
    """Random-walk proposal for one parameter block"""

    def __init__(self, name: str, initial_sd, target: float = 0.44, window: int = 50):
        self.name = name
        self.initial_sd = np.atleast_1d(np.asarray(initial_sd, dtype=float))
        self.dim = len(self.initial_sd)
        self.target = target
        self.window = window
        self.log_scale = 0.0
        self.adapting = True
        self.accepted = 0
        self.proposed = 0
        self._n = 0
        self._mean = np.zeros(self.dim)
        self._m2 = np.zeros((self.dim, self.dim))
        self._base_chol = np.diag(self.initial_sd)
        self._adapted_chol: Optional[np.ndarray] = None

    @property
    def scale(self) -> float:
        return float(np.exp(self.log_scale))

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")

    def propose(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        chol = self._base_chol
        if self._adapted_chol is not None and rng.random() < ADAPTIVE_MIX:
            chol = self._adapted_chol
        return x + self.scale * (chol @ rng.standard_normal(self.dim))

    def record(self, x: np.ndarray, accepted: bool):
        """Count the outcome and, during burn-in, adapt scale and covariance"""
        self.proposed += 1
        self.accepted += int(accepted)
        if not self.adapting:
            return
        self._n += 1
        gain = (1.0 + self._n / self.window) ** -0.6
        self.log_scale += gain * (float(accepted) - self.target)

        delta = x - self._mean
        self._mean = self._mean + delta / self._n
        self._m2 = self._m2 + np.outer(delta, x - self._mean)
        if self.dim > 1 and self._n >= 2 * self.window and self._n % self.window == 0:
            cov = self._m2 / (self._n - 1)
            jitter = 1e-10 * np.diag(self.initial_sd ** 2)
            try:
                self._adapted_chol = np.linalg.cholesky(OPTIMAL_SCALE / self.dim * cov + jitter)
            except np.linalg.LinAlgError:
                pass

    def freeze(self):
        self.adapting = False

    def reset_counts(self):
        self.accepted = 0
        self.proposed = 0


@dataclass
class ChainResult:
    chain: int
    draws: pd.DataFrame
    event_log_hazard: pd.DataFrame
    med_years: pd.DataFrame
    augmentations: Optional[pd.DataFrame]
    acceptance: Dict[str, float]
    counters: Dict[str, int]
    step_sizes: Dict[str, float]


@dataclass
class FitResult:
    config: FitConfig
    spec: ModelSpec
    seed: int
    chains: List[ChainResult]
    rhat: Dict[str, float]
    summary: pd.DataFrame
    fit_summary: FitSummary
    output_dir: Optional[Path] = None


def default_basis(options: ModelOptions) -> BSplineBasis:
    lo, hi = 65.0, 95.0
    knots = lo + (hi - lo) * np.arange(1, options.interior_knots + 1) / (options.interior_knots + 1)
    return BSplineBasis(degree=options.spline_degree, interior_knots=tuple(knots), lo=lo, hi=hi)


def build_spec(cohort: Cohort, options: ModelOptions) -> ModelSpec:
    """Spline basis from the cohort's ages, plus centering and augmentation switch"""
    if len(cohort) == 0:
        basis = default_basis(options)
    else:
        basis = make_basis([s.first_age for s in cohort], [s.event_time for s in cohort],
                           degree=options.spline_degree, n_interior=options.interior_knots)
    return ModelSpec(basis=basis, age_center=options.age_center, augment=options.augment)


def initial_parameters(cohort: Cohort, spec: ModelSpec, options: ModelOptions) -> Parameters:
    """
    beta by least squares on off-medication visits, omega from its residuals,
    Sigma = I, transition and hazard coefficients at zero except the baseline
    log hazard, which starts at the crude event rate.
    """
    rows, targets = [], []
    for subject in cohort:
        x = subject.covariates.design()
        for visit in subject.visits:
            if visit.y is not None and visit.med is MedStatus.OFF:
                age = visit.age - spec.age_center
                rows.append(np.r_[1.0, x, age, age * x])
                targets.append(visit.y)
    beta = np.zeros(len(BETA_NAMES))
    omega = 10.0
    if len(rows) > len(BETA_NAMES):
        design, y = np.asarray(rows), np.asarray(targets)
        beta = np.linalg.lstsq(design, y, rcond=None)[0]
        residuals = y - design @ beta
        omega = float(max(residuals.std(ddof=1), 1e-3))
    elif targets:
        beta[0] = float(np.mean(targets))

    events = sum(s.event_indicator for s in cohort)
    exposure = sum(s.event_time - s.first_age for s in cohort)
    kappa0 = float(np.log(max(events, 0.5) / exposure)) if exposure > 0 else 0.0

    return Parameters(
        longitudinal=LongitudinalParams(beta=beta, beta_m=0.0, omega=omega, sigma=np.eye(2), nu=options.nu),
        medication=MedicationParams(alpha=np.zeros(8), decay=options.decay),
        hazard=HazardParams(kappa0=kappa0, kappa=np.zeros(spec.basis.n_basis), beta_h=np.zeros(3),
                            lambda_mu=0.0, lambda_m=0.0, rho_mu=options.rho_mu, rho_m=options.rho_m),
    )


def initial_state(subject, b=None) -> AugmentedState:
    """Carry-forward statuses and late switches; all-off when nothing is observed"""
    b = np.zeros(2) if b is None else np.asarray(b, dtype=float)
    try:
        return locf_state(subject, b)
    except ContractViolation:
        return AugmentedState(b=b, statuses=(0,) * subject.n_visits, switch_ages={})


def complete_data_logpost(params: Parameters, cohort: Cohort, states: List[AugmentedState], priors: PriorSpec,
                          spec: ModelSpec, options: ModelOptions) -> float:
    """Sum over subjects of all likelihood factors and the random-effects density, plus the log prior"""
    value = prior_density.log_prior(params, priors, options)
    for subject, state in zip(cohort, states):
        data = SubjectData.from_subject(subject)
        value += subject_loglik(params, spec, data, state)
        value += random_effects_logpdf(state.b, params.longitudinal.sigma)
    return float(value)


class ChainSampler:
    """State and update kernels of one chain"""

    def __init__(self, cohort: Cohort, config: FitConfig, spec: ModelSpec, rng: np.random.Generator,
                 chain: int = 0, initial: Optional[Parameters] = None):
        self.cohort = cohort
        self.config = config
        self.options = config.options
        self.priors = config.priors
        self.spec = spec
        self.rng = rng
        self.chain = chain
        self.data = [SubjectData.from_subject(s) for s in cohort]
        params = initial if initial is not None else initial_parameters(cohort, spec, self.options)
        if not self.options.include_risk_factor_feature:
            params = params.with_hazard(lambda_mu=0.0)
        self.params = params
        self.states = [initial_state(s) for s in cohort]
        self.timelines = [subject_timeline(d, st) for d, st in zip(self.data, self.states)]
        self.stack = StackedCohort(self.data, spec)
        for i, (state, timeline) in enumerate(zip(self.states, self.timelines)):
            self.stack.set_state(i, state, timeline)
        self.terms = self._evaluate(self.params, self.random_effects())
        self.counters = {"missing_status_updates": 0, "switch_time_updates": 0}

        target, window = config.chain.target_accept, config.chain.adapt_window
        self.blocks: Dict[str, AdaptiveBlock] = {
            "beta": AdaptiveBlock("beta", BETA_SD, target, window),
            "log_omega": AdaptiveBlock("log_omega", [0.1], target, window),
            "alpha": AdaptiveBlock("alpha", ALPHA_SD, target, window),
            "hazard": AdaptiveBlock("hazard", self._hazard_sd(), target, window),
        }
        if self.options.sample_skewness:
            self.blocks["nu"] = AdaptiveBlock("nu", [0.2], target, window)
        if self.options.estimate_decay:
            self.blocks["log_decay"] = AdaptiveBlock("log_decay", [0.2], target, window)
        if self.options.sample_staleness:
            self.blocks["log_rho"] = AdaptiveBlock("log_rho", [0.2, 0.2], target, window)
        self.re_blocks = [AdaptiveBlock(f"b[{d.id}]", RANDOM_EFFECT_SD, target, window) for d in self.data]

    # likelihood bookkeeping

    @property
    def augmenting(self) -> bool:
        return self.spec.augment and self.options.likelihood_enabled

    def random_effects(self) -> np.ndarray:
        return np.array([st.b for st in self.states], dtype=float).reshape(len(self.states), 2)

    def _evaluate(self, params: Parameters, b: np.ndarray) -> np.ndarray:
        """Per-subject likelihood terms for the whole cohort, zeros when the likelihood is off"""
        if not self.options.likelihood_enabled:
            return np.zeros((len(self.data), len(TERMS)))
        return self.stack.terms(params, b)

    def _fixed_terms(self, i: int, state: AugmentedState) -> np.ndarray:
        """Every term of subject i except the event term"""
        p, data, c = self.params, self.data[i], self.spec.age_center
        b, statuses = state.b, state.statuses
        augment = self.spec.augment
        return np.array([
            longitudinal_term(p, data, b, statuses, c),
            medication_term(p, data, b, statuses, c),
            switching_term(p, data, b, statuses, state.switch_ages, c) if augment else 0.0,
            initial_term(p, data, b, statuses, c) if augment else 0.0,
        ])

    def log_posterior(self) -> float:
        """Current complete-data log posterior from the cached terms"""
        value = float(self.terms.sum()) + prior_density.log_prior(self.params, self.priors, self.options)
        sigma = self.params.longitudinal.sigma
        return value + float(random_effects_logpdfs(self.random_effects(), sigma).sum())

    def _metropolis(self, block: AdaptiveBlock, current: np.ndarray, current_logp: float,
                    target: Callable[[np.ndarray], Tuple[float, object]]):
        proposal = block.propose(current, self.rng)
        try:
            logp, payload = target(proposal)
        except (NumericDomainError, FloatingPointError, np.linalg.LinAlgError, ValueError):
            logp, payload = -np.inf, None
        accepted = bool(np.isfinite(logp) and np.log(self.rng.random()) < logp - current_logp)
        block.record(proposal if accepted else current, accepted)
        return accepted, payload

    def _draw_index(self, logw) -> Optional[int]:
        logw = np.asarray(logw, dtype=float)
        if not np.isfinite(logw).any():
            return None
        probs = np.exp(logw - logsumexp(logw))
        return int(self.rng.choice(len(probs), p=probs / probs.sum()))

    def _commit(self, i: int, state: AugmentedState, timeline: MedicationTimeline, row: np.ndarray):
        self.states[i] = state
        self.timelines[i] = timeline
        self.stack.set_state(i, state, timeline)
        self.terms[i] = row

    # latent-variable updates

    def _status_configurations(self, i: int, j: int):
        """Both values of the status at visit j crossed with the switch ages of its two adjacent intervals"""
        data, state = self.data[i], self.states[i]
        ages, n = data.int_ages, len(data.int_ages)
        kept = {k: s for k, s in state.switch_ages.items() if k not in (j, j + 1)}
        for value in (0, 1):
            statuses = list(state.statuses)
            statuses[j] = value
            affected = [k for k in (j, j + 1) if 1 <= k < n and statuses[k] != statuses[k - 1]]
            ranges = [range(ages[k - 1] + 1, ages[k] + 1) for k in affected]
            for placement in itertools.product(*ranges):
                yield tuple(statuses), {**kept, **{k: int(s) for k, s in zip(affected, placement)}}

    def _draw_candidate(self, i: int, states: List[AugmentedState], fixed: np.ndarray):
        """Gibbs draw among candidate states of subject i; `fixed` holds their non-event terms"""
        data = self.data[i]
        timelines = [subject_timeline(data, st) for st in states]
        events = self.stack.subject_event_terms(i, self.params, states[0].b, [tl.status for tl in timelines])
        k = self._draw_index(fixed.sum(axis=1) + events)
        if k is not None:
            self._commit(i, states[k], timelines[k], np.r_[fixed[k], events[k]])

    def update_missing_status(self, i: int):
        """Blocked Gibbs draw of each missing status together with its adjacent switch ages"""
        for j in self.data[i].missing:
            candidates = [self.states[i].with_statuses(statuses, switches)
                          for statuses, switches in self._status_configurations(i, j)]
            self._draw_candidate(i, candidates, np.array([self._fixed_terms(i, st) for st in candidates]))
            self.counters["missing_status_updates"] += 1

    def update_switch_times(self, i: int):
        """Per-interval Gibbs draw: switch-age distribution times the event-likelihood factor"""
        data = self.data[i]
        c = self.spec.age_center
        for interval in switching_intervals(data.int_ages, self.states[i].statuses):
            state = self.states[i]
            log_probs = interval_switch_log_probs(self.params, data, state.b, state.statuses, interval.j, c)
            current = state.switch_ages[interval.j] - interval.prev_age - 1
            candidates = [state.with_statuses(state.statuses, {**state.switch_ages, interval.j: int(age)})
                          for age in interval.candidate_ages]
            # only the switching term moves with the switch age among the fixed terms
            fixed = np.repeat(self.terms[i, :EVENT][None, :], len(candidates), axis=0)
            fixed[:, 2] += log_probs - log_probs[current]
            self._draw_candidate(i, candidates, fixed)
            self.counters["switch_time_updates"] += 1

    def update_random_effects(self):
        """Independent random-walk step for every subject's random effects, evaluated in one pass"""
        b = self.random_effects()
        sigma = self.params.longitudinal.sigma
        proposal = np.array([block.propose(row, self.rng) for block, row in zip(self.re_blocks, b)]).reshape(b.shape)
        current = self.terms.sum(axis=1) + random_effects_logpdfs(b, sigma)
        try:
            terms = self._evaluate(self.params, proposal)
            proposed = terms.sum(axis=1) + random_effects_logpdfs(proposal, sigma)
        except (NumericDomainError, FloatingPointError, np.linalg.LinAlgError, ValueError):
            terms, proposed = self.terms, np.full(len(b), -np.inf)
        log_u = np.log(self.rng.random(len(b)))
        accepted = np.isfinite(proposed) & (log_u < proposed - current)
        for i in range(len(b)):
            self.re_blocks[i].record(proposal[i] if accepted[i] else b[i], bool(accepted[i]))
            if accepted[i]:
                self.states[i] = self.states[i].with_b(proposal[i])
                self.terms[i] = terms[i]

    # parameter blocks

    def _hazard_sd(self) -> List[float]:
        n_kappa = self.spec.basis.n_basis
        sd = [0.1] + [0.1] * n_kappa + [0.1] * 3
        if self.options.include_risk_factor_feature:
            sd.append(0.001)
        sd.append(0.05)
        return sd

    def _hazard_vector(self, params: Parameters) -> np.ndarray:
        haz = params.hazard
        parts = [[haz.kappa0], haz.kappa, haz.beta_h]
        if self.options.include_risk_factor_feature:
            parts.append([haz.lambda_mu])
        parts.append([haz.lambda_m])
        return np.concatenate(parts).astype(float)

    def _with_hazard_vector(self, params: Parameters, v: np.ndarray) -> Parameters:
        n_kappa = len(params.hazard.kappa)
        rest = v[4 + n_kappa:]
        lambda_mu, lambda_m = (rest[0], rest[1]) if self.options.include_risk_factor_feature else (0.0, rest[0])
        return params.with_hazard(kappa0=float(v[0]), kappa=v[1:1 + n_kappa], beta_h=v[1 + n_kappa:4 + n_kappa],
                                  lambda_mu=float(lambda_mu), lambda_m=float(lambda_m))

    def _run_block(self, name: str, current: np.ndarray, to_params: Callable[[np.ndarray], Parameters],
                   prior: Callable[[Parameters], float], jacobian: Callable[[np.ndarray], float] = lambda v: 0.0):
        """One MH step on a parameter block; the cohort's terms are re-evaluated in one stacked pass"""
        b = self.random_effects()
        current_logp = float(self.terms.sum()) + prior(self.params) + jacobian(current)

        def target(v):
            params = to_params(v)
            terms = self._evaluate(params, b)
            return float(terms.sum()) + prior(params) + jacobian(v), (params, terms)

        accepted, payload = self._metropolis(self.blocks[name], current, current_logp, target)
        if accepted:
            self.params, self.terms = payload

    def update_parameters(self):
        """All parameter blocks in their fixed order"""
        p, priors, options = self.params, self.priors, self.options

        self._run_block(
            "beta", np.r_[p.longitudinal.beta, p.longitudinal.beta_m],
            lambda v: self.params.with_longitudinal(beta=v[:8], beta_m=float(v[8])),
            lambda q: prior_density.beta_logprior(q, priors))

        self._run_block(
            "log_omega", np.array([np.log(self.params.longitudinal.omega)]),
            lambda v: self.params.with_longitudinal(omega=float(np.exp(v[0]))),
            lambda q: prior_density.omega_logprior(q.longitudinal.omega, priors),
            jacobian=lambda v: float(v[0]))

        if options.sample_skewness:
            self._run_block(
                "nu", np.array([self.params.longitudinal.nu]),
                lambda v: self.params.with_longitudinal(nu=float(v[0])),
                lambda q: prior_density.normal_logprior(q.longitudinal.nu, priors.nu_sd))

        self.update_sigma()

        self._run_block(
            "alpha", self.params.medication.alpha.copy(),
            lambda v: self.params.with_medication(alpha=v),
            lambda q: prior_density.alpha_logprior(q, priors))

        if options.estimate_decay:
            self._run_block(
                "log_decay", np.array([np.log(self.params.medication.decay)]),
                lambda v: self.params.with_medication(decay=float(np.exp(v[0]))),
                lambda q: prior_density.half_normal_logprior(q.medication.decay, priors.decay_sd),
                jacobian=lambda v: float(v[0]))

        self._run_block(
            "hazard", self._hazard_vector(self.params),
            lambda v: self._with_hazard_vector(self.params, v),
            lambda q: prior_density.hazard_logprior(q, priors, options))

        if options.sample_staleness:
            self._run_block(
                "log_rho", np.log([self.params.hazard.rho_mu, self.params.hazard.rho_m]),
                lambda v: self.params.with_hazard(rho_mu=float(np.exp(v[0])), rho_m=float(np.exp(v[1]))),
                lambda q: (prior_density.half_normal_logprior(q.hazard.rho_mu, priors.staleness_sd)
                           + prior_density.half_normal_logprior(q.hazard.rho_m, priors.staleness_sd)),
                jacobian=lambda v: float(v[0] + v[1]))

    def update_sigma(self):
        """Conjugate inverse-Wishart draw given the random effects"""
        b = self.random_effects()
        df = self.priors.iw_df + len(b)
        scale = self.priors.iw_scale * np.eye(2) + b.T @ b
        sigma = invwishart.rvs(df=df, scale=scale, random_state=self.rng)
        self.params = self.params.with_longitudinal(sigma=np.asarray(sigma, dtype=float))

    # driver

    def sweep(self):
        if self.augmenting:
            for i, data in enumerate(self.data):
                if data.missing:
                    self.update_missing_status(i)
                self.update_switch_times(i)
        if self.data:
            self.update_random_effects()
        self.update_parameters()

    def acceptance_rates(self) -> Dict[str, float]:
        rates = {name: block.acceptance_rate for name, block in self.blocks.items()}
        if self.re_blocks:
            rates["random_effects"] = float(np.nanmean([b.acceptance_rate for b in self.re_blocks]))
        return rates

    def step_sizes(self) -> Dict[str, float]:
        return {name: block.scale for name, block in self.blocks.items()}

    def _end_burnin(self):
        for block in [*self.blocks.values(), *self.re_blocks]:
            block.freeze()
        rates = ", ".join(f"{k}={v:.2f}" for k, v in self.acceptance_rates().items())
        logger.info(f"Chain {self.chain}: burn-in finished, acceptance {rates}")
        for block in [*self.blocks.values(), *self.re_blocks]:
            block.reset_counts()

    def snapshot(self) -> Tuple[Dict[str, float], Dict[str, float], Dict[str, float], Dict[str, str]]:
        log_hazard = self.stack.event_log_hazard(self.params, self.random_effects())
        event_log_hazard = {d.id: float(v) for d, v in zip(self.data, log_hazard) if d.subject.event_indicator}
        med_years = {d.id: float(v) for d, v in zip(self.data, self.stack.years_on_med())}
        augmentations = {d.id: st.configuration_key() for d, st in zip(self.data, self.states)}
        return self.params.to_flat(), event_log_hazard, med_years, augmentations

    def run(self, quiet: bool = False) -> ChainResult:
        chain_cfg = self.config.chain
        logger.info(f"Chain {self.chain}: {chain_cfg.n_iter} iterations, burn-in {chain_cfg.n_burnin}, "
                    f"thin {chain_cfg.thin}, {len(self.data)} subjects, model {self.options.model}")
        draws, hazards, years, augmentations = [], [], [], []
        disable = quiet or not sys.stderr.isatty()
        for iteration in tqdm(range(chain_cfg.n_iter), desc=f"chain {self.chain}", position=self.chain,
                              leave=False, disable=disable):
            if iteration == chain_cfg.n_burnin:
                self._end_burnin()
            self.sweep()
            if iteration >= chain_cfg.n_burnin and (iteration - chain_cfg.n_burnin) % chain_cfg.thin == 0:
                flat, event_log_hazard, med_years, keys = self.snapshot()
                draws.append(flat)
                hazards.append(event_log_hazard)
                years.append(med_years)
                if chain_cfg.record_augmentations:
                    augmentations.append(keys)

        rates = self.acceptance_rates()
        logger.info(f"Chain {self.chain}: done, acceptance "
                    + ", ".join(f"{k}={v:.2f}" for k, v in rates.items())
                    + f"; missing_status_updates={self.counters['missing_status_updates']}"
                    + f", switch_time_updates={self.counters['switch_time_updates']}")
        columns = [d.id for d in self.data]
        decedents = [d.id for d in self.data if d.subject.event_indicator]
        return ChainResult(
            chain=self.chain,
            draws=pd.DataFrame(draws),
            event_log_hazard=pd.DataFrame(hazards, columns=decedents),
            med_years=pd.DataFrame(years, columns=columns),
            augmentations=pd.DataFrame(augmentations, columns=columns) if chain_cfg.record_augmentations else None,
            acceptance=rates,
            counters=dict(self.counters),
            step_sizes=self.step_sizes(),
        )


def resolve_seed(config: FitConfig) -> int:
    """Config seed, else JMRMT_SEED, else fresh entropy (recorded in the manifest)"""
    if config.chain.seed is not None:
        return int(config.chain.seed)
    if settings.SEED is not None:
        return int(settings.SEED)
    return int(np.random.SeedSequence().entropy % (2 ** 63))


def chain_rng(seed: int, chain: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chain,)))


def run_chain(cohort: Cohort, config: FitConfig, spec: ModelSpec, seed: int, chain: int,
              quiet: bool = False) -> ChainResult:
    sampler = ChainSampler(cohort, config, spec, chain_rng(seed, chain), chain=chain)
    return sampler.run(quiet=quiet)


def run_fit(cohort: Cohort, config: FitConfig, output_dir: Optional[Path] = None, jobs: Optional[int] = None,
            quiet: bool = False) -> FitResult:
    """Run every chain (in worker processes up to `jobs`), diagnose, summarize and optionally persist"""
    spec = build_spec(cohort, config.options)
    seed = resolve_seed(config)
    n_chains = config.chain.n_chains
    jobs = max(1, min(jobs or settings.JOBS, n_chains))
    logger.info(f"Fitting {config.options.model} on '{cohort.label}': {n_chains} chains, seed {seed}, {jobs} worker(s)")

    if jobs == 1:
        chains = [run_chain(cohort, config, spec, seed, k, quiet) for k in range(n_chains)]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_chain, cohort, config, spec, seed, k, quiet) for k in range(n_chains)]
            chains = [f.result() for f in futures]

    rhat: Dict[str, float] = {}
    if n_chains >= 2 and len(chains[0].draws) >= 4:
        rhat = gelman_rubin([c.draws for c in chains])
    else:
        logger.warning("R-hat not computed: needs at least two chains with four retained draws each")

    summary = summarize(pd.concat([c.draws for c in chains], ignore_index=True))
    summary["rhat"] = pd.Series(rhat, dtype=float).reindex(summary.index)
    finite = [v for v in rhat.values() if np.isfinite(v)]
    max_rhat = max(rhat.values()) if rhat else None
    fit_summary = FitSummary(
        model=config.options.model,
        cohort_label=cohort.label,
        n_subjects=len(cohort),
        n_chains=n_chains,
        n_kept_per_chain=len(chains[0].draws),
        max_rhat=float(max_rhat) if max_rhat is not None else None,
        converged=bool(rhat) and len(finite) == len(rhat) and max(finite) < config.rhat_threshold,
        parameters={
            name: ParameterSummary(mean=row["mean"], sd=row["sd"], q025=row["q025"], q975=row["q975"],
                                   rhat=None if pd.isna(row["rhat"]) else float(row["rhat"]))
            for name, row in summary.iterrows()
        },
    )
    result = FitResult(config=config, spec=spec, seed=seed, chains=chains, rhat=rhat, summary=summary,
                       fit_summary=fit_summary)
    if output_dir is not None:
        from app.services.results import ResultsStore
        result.output_dir = ResultsStore.save_fit(result, cohort, Path(output_dir))
    logger.info(f"Fit finished: max R-hat {fit_summary.max_rhat}, converged={fit_summary.converged}")
    return result
