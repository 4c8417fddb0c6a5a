"""
Cohort-wide vectorized likelihood used by the sampler.

Every subject owns fixed slices of stacked visit, visit-pair, switch-candidate,
yearly-status and quadrature-node arrays. Quadrature pieces are split at every
integer age up to the last visit, so nodes and basis values are computed once
and a latent update only rewrites the subject's status slices.
"""

from typing import Sequence

import numpy as np
from scipy.special import log_expit
from scipy.stats import multivariate_normal

from app.models.domain import AugmentedState, MedicationTimeline, MedStatus
from app.models.parameters import HazardParams, LongitudinalParams, Parameters
from app.services.likelihood import ModelSpec, SubjectData
from app.services.medication import transition_logit, transition_prob
from app.services.numerics import bernoulli_logpmf, skew_normal_logpdf
from app.services.survival import quadrature_nodes

TERMS = ("longitudinal", "medication", "switching", "initial", "event")
EVENT = TERMS.index("event")


def _offsets(counts: Sequence[int]) -> np.ndarray:
    return np.r_[0, np.cumsum(np.asarray(counts, dtype=int))].astype(int)


def _concat(parts, dtype=float) -> np.ndarray:
    return np.concatenate(parts).astype(dtype) if len(parts) else np.empty(0, dtype=dtype)


def random_effects_logpdfs(b: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """N(0, sigma) log density of every row of b"""
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    if len(b) == 0:
        return np.empty(0)
    return np.atleast_1d(multivariate_normal.logpdf(b, mean=np.zeros(2), cov=sigma)).reshape(len(b))


class StackedCohort:
    """Static layout of a cohort plus the current statuses, timelines and switch choices"""

    def __init__(self, data: Sequence[SubjectData], spec: ModelSpec):
        self.spec = spec
        self.n = n = len(data)
        c = spec.age_center
        self.x = np.array([d.subject.covariates.design() for d in data], dtype=float).reshape(n, 3)
        self.indicator = np.array([d.subject.event_indicator for d in data], dtype=float)

        # visits
        counts = [len(d.ages) for d in data]
        self.visit_offsets = _offsets(counts)
        self.visit_owner = np.repeat(np.arange(n), counts)
        self.visit_age = _concat([d.ages for d in data])
        self.visit_age_c = self.visit_age - c
        self.y = _concat([d.y for d in data])
        self.has_y = _concat([d.has_y for d in data], dtype=bool)
        self.visit_status = np.zeros(len(self.visit_age))
        self.first_missing = np.array([d.observed[0] == MedStatus.MISSING for d in data], dtype=bool)

        # consecutive visit pairs; pair k of a subject is the interval ending at visit k + 1
        self.pair_offsets = _offsets([k - 1 for k in counts])
        self.pair_prev = _concat([np.arange(s, e - 1) for s, e in zip(self.visit_offsets[:-1],
                                                                        self.visit_offsets[1:])], dtype=int)
        self.pair_next = self.pair_prev + 1
        self.pair_owner = self.visit_owner[self.pair_prev]
        gaps = (self.visit_age[self.pair_next] - self.visit_age[self.pair_prev]).astype(int)
        self.cand_offsets = _offsets(gaps)
        self.cand_pair = np.repeat(np.arange(len(gaps)), gaps)
        self.cand_age = (self.visit_age[self.pair_prev][self.cand_pair] + 1.0
                         + (np.arange(len(self.cand_pair)) - self.cand_offsets[:-1][self.cand_pair]))
        self.chosen = np.full(len(gaps), -1, dtype=int)

        # yearly statuses from the first to the last visit
        self.first_age = np.array([d.first_age for d in data], dtype=float)
        self.last_age = np.array([d.last_age for d in data], dtype=float)
        spans = (self.last_age - self.first_age).astype(int) + 1
        self.year_offsets = _offsets(spans)
        self.year_status = np.zeros(int(self.year_offsets[-1]))

        # quadrature nodes, fixed for the whole run
        nodes, weights, node_counts = [], [], []
        for d in data:
            # same pieces as feature_path: every integer age of the timeline, then the last visit
            grid = np.arange(int(d.first_age), int(d.last_age) + 1, dtype=float)
            t, w = quadrature_nodes(d.first_age, d.subject.event_time, (*grid, d.last_age), spec.rule)
            nodes.append(t)
            weights.append(w)
            node_counts.append(len(t))
        self.node_offsets = _offsets(node_counts)
        self.node_owner = np.repeat(np.arange(n), node_counts)
        node_t = _concat(nodes)
        self.node_weights = _concat(weights)
        self.node_basis = (spec.basis.evaluate(node_t) if len(node_t)
                           else np.empty((0, spec.basis.n_basis)))
        self.node_elapsed = np.maximum(node_t - self.last_age[self.node_owner], 0.0)
        (self.node_age_c, self.node_year, self.node_year_next,
         self.node_frac) = self._feature_index(node_t, self.node_owner)

        event_t = np.array([d.subject.event_time for d in data], dtype=float)
        self.event_basis = spec.basis.evaluate(event_t) if n else np.empty((0, spec.basis.n_basis))
        self.event_elapsed = np.maximum(event_t - self.last_age, 0.0)
        (self.event_age_c, self.event_year, self.event_year_next,
         self.event_frac) = self._feature_index(event_t, np.arange(n))

    def _feature_index(self, t: np.ndarray, owner: np.ndarray):
        """Centered frozen age, yearly-status index, next-year index and fractional year at each t"""
        frozen = np.minimum(t, self.last_age[owner])
        whole = np.floor(frozen)
        span = self.year_offsets[owner + 1] - self.year_offsets[owner]
        local = np.clip(whole.astype(int) - self.first_age[owner].astype(int), 0, span - 1)
        year = self.year_offsets[owner] + local
        year_next = self.year_offsets[owner] + np.minimum(local + 1, span - 1)
        return frozen - self.spec.age_center, year, year_next, frozen - whole

    # latent state

    def set_state(self, i: int, state: AugmentedState, timeline: MedicationTimeline):
        """Write subject i's statuses, yearly timeline and switch choices into the stacked arrays"""
        self.visit_status[self.visit_offsets[i]:self.visit_offsets[i + 1]] = state.statuses
        self.year_status[self.year_offsets[i]:self.year_offsets[i + 1]] = timeline.status
        first_pair = self.pair_offsets[i]
        self.chosen[first_pair:self.pair_offsets[i + 1]] = -1
        for j, age in state.switch_ages.items():
            k = first_pair + j - 1
            prev_age = int(self.visit_age[self.pair_prev[k]])
            self.chosen[k] = self.cand_offsets[k] + int(age) - prev_age - 1

    # evaluation

    def trajectory(self, lon: LongitudinalParams, b: np.ndarray, age_c, owner, status):
        x = self.x[owner]
        intercept = lon.beta[0] + x @ lon.beta[1:4] + b[owner, 0]
        slope = lon.beta[4] + x @ lon.beta[5:8] + b[owner, 1]
        return intercept + slope * age_c + lon.beta_m * age_c * status

    def _year_on(self):
        """Years on medication through each yearly index, counted from the subject's first year"""
        cumulative = np.cumsum(self.year_status)
        base = cumulative[self.year_offsets[:-1]] - self.year_status[self.year_offsets[:-1]]
        return cumulative, base

    @staticmethod
    def _log_hazard(haz: HazardParams, basis_rows, xb, elapsed, g_mu, g_m):
        return (haz.kappa0 + basis_rows @ haz.kappa + xb
                + haz.lambda_mu * np.exp(-haz.rho_mu * elapsed) * g_mu
                + haz.lambda_m * np.exp(-haz.rho_m * elapsed) * g_m)

    def event_log_hazard(self, params: Parameters, b: np.ndarray) -> np.ndarray:
        """Log hazard at every subject's event or censoring time"""
        lon, owner = params.longitudinal, np.arange(self.n)
        cumulative, base = self._year_on()
        g_mu = self.trajectory(lon, b, self.event_age_c, owner, self.year_status[self.event_year])
        g_m = (cumulative[self.event_year] - base + self.event_frac * self.year_status[self.event_year_next])
        return self._log_hazard(params.hazard, self.event_basis, self.x @ params.hazard.beta_h,
                                self.event_elapsed, g_mu, g_m)

    def event_terms(self, params: Parameters, b: np.ndarray) -> np.ndarray:
        lon, haz, owner = params.longitudinal, params.hazard, self.node_owner
        cumulative, base = self._year_on()
        g_mu = self.trajectory(lon, b, self.node_age_c, owner, self.year_status[self.node_year])
        g_m = (cumulative[self.node_year] - base[owner] + self.node_frac * self.year_status[self.node_year_next])
        xb = self.x @ haz.beta_h
        log_h = self._log_hazard(haz, self.node_basis, xb[owner], self.node_elapsed, g_mu, g_m)
        with np.errstate(over="ignore"):
            cumulative_hazard = np.bincount(owner, self.node_weights * np.exp(log_h), minlength=self.n)
        at_event = np.where(self.indicator > 0, self.event_log_hazard(params, b), 0.0)
        return -cumulative_hazard + at_event

    def terms(self, params: Parameters, b: np.ndarray) -> np.ndarray:
        """Per-subject likelihood terms, shape (n, len(TERMS)); b holds one row of random effects per subject"""
        n, c = self.n, self.spec.age_center
        lon, med = params.longitudinal, params.medication
        b = np.asarray(b, dtype=float).reshape(n, 2)
        out = np.zeros((n, len(TERMS)))
        mu_visit = self.trajectory(lon, b, self.visit_age_c, self.visit_owner, self.visit_status)

        observed = self.has_y
        out[:, 0] = np.bincount(self.visit_owner[observed],
                                skew_normal_logpdf(self.y[observed], mu_visit[observed], lon.omega, lon.nu),
                                minlength=n)

        prev, nxt = self.pair_prev, self.pair_next
        m_prev = self.visit_status[prev]
        logits = transition_logit(med, m_prev, self.visit_age[nxt], self.visit_age[prev], mu_visit[prev], c)
        out[:, 1] = np.bincount(self.pair_owner, bernoulli_logpmf(self.visit_status[nxt], logits), minlength=n)

        if self.spec.augment:
            out[:, 2] = self._switching(params, m_prev, mu_visit)
            out[:, 3] = self._initial(params, b)
        out[:, EVENT] = self.event_terms(params, b)
        return out

    def _switching(self, params: Parameters, m_prev: np.ndarray, mu_visit: np.ndarray) -> np.ndarray:
        """log P(switch age) of every switching interval: candidate weights inv_logit, normalized per interval"""
        switching = np.nonzero(m_prev != self.visit_status[self.pair_next])[0]
        if len(switching) == 0:
            return np.zeros(self.n)
        cp, prev = self.cand_pair, self.pair_prev
        weights = log_expit(transition_logit(params.medication, m_prev[cp], self.cand_age,
                                             self.visit_age[prev][cp], mu_visit[prev][cp], self.spec.age_center))
        starts = self.cand_offsets[:-1]
        peak = np.maximum.reduceat(weights, starts)
        normalizer = peak + np.log(np.add.reduceat(np.exp(weights - peak[cp]), starts))
        chosen = weights[self.chosen[switching]] - normalizer[switching]
        return np.bincount(self.pair_owner[switching], chosen, minlength=self.n)

    def _initial(self, params: Parameters, b: np.ndarray) -> np.ndarray:
        """Stationary-chain log probability of an unobserved first status"""
        out = np.zeros(self.n)
        idx = np.nonzero(self.first_missing)[0]
        if len(idx) == 0:
            return out
        lon, med, c = params.longitudinal, params.medication, self.spec.age_center
        age = self.first_age[idx]
        g_off = self.trajectory(lon, b, age - c, idx, 0.0)
        g_on = self.trajectory(lon, b, age - c, idx, 1.0)
        p01 = transition_prob(med, 0, age, age - 1, g_off, c)
        p11 = transition_prob(med, 1, age, age - 1, g_on, c)
        denominator = p01 + 1.0 - p11
        p_on = np.where(denominator < 1e-300, 0.5, p01 / np.maximum(denominator, 1e-300))
        p_on = np.clip(p_on, 1e-300, 1.0 - 1e-16)
        first = self.visit_status[self.visit_offsets[idx]]
        out[idx] = np.where(first == 1, np.log(p_on), np.log(1.0 - p_on))
        return out

    def subject_event_terms(self, i: int, params: Parameters, b_i, timelines: Sequence[Sequence[int]]) -> np.ndarray:
        """Event term of subject i under each candidate yearly timeline, all on the subject's fixed nodes"""
        lon, haz = params.longitudinal, params.hazard
        status = np.atleast_2d(np.asarray(timelines, dtype=float))
        cumulative = np.cumsum(status, axis=1)
        first_year = self.year_offsets[i]
        b_row = np.asarray(b_i, dtype=float).reshape(1, 2)
        x = self.x[i]
        intercept = lon.beta[0] + x @ lon.beta[1:4] + b_row[0, 0]
        slope = lon.beta[4] + x @ lon.beta[5:8] + b_row[0, 1]
        xb = x @ haz.beta_h

        def features(age_c, year, year_next, frac):
            local, local_next = year - first_year, year_next - first_year
            g_mu = intercept + slope * age_c + lon.beta_m * age_c * status[:, local]
            g_m = cumulative[:, local] + frac * status[:, local_next]
            return g_mu, g_m

        nodes = slice(self.node_offsets[i], self.node_offsets[i + 1])
        g_mu, g_m = features(self.node_age_c[nodes], self.node_year[nodes], self.node_year_next[nodes],
                             self.node_frac[nodes])
        log_h = self._log_hazard(haz, self.node_basis[nodes], xb, self.node_elapsed[nodes], g_mu, g_m)
        with np.errstate(over="ignore"):
            value = -(np.exp(log_h) @ self.node_weights[nodes])
        if self.indicator[i] > 0:
            g_mu, g_m = features(self.event_age_c[i], self.event_year[i], self.event_year_next[i], self.event_frac[i])
            value = value + self._log_hazard(haz, self.event_basis[i], xb, self.event_elapsed[i], g_mu, g_m)
        return value

    def years_on_med(self) -> np.ndarray:
        """Years on medication of every subject by the last visit"""
        if self.n == 0:
            return np.empty(0)
        return np.add.reduceat(self.year_status, self.year_offsets[:-1])
