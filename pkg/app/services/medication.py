"""
Medication-transition submodel.

logit P(on at a_j | status m at a_{j-1}) =
    (a1 + a2 m) + (a3 + a4 m)(a_j - c) + (a5 + a6 m) exp(-decay |a_j - a_{j-1}|) + (a7 + a8 m) g
where g is the risk-factor feature at the previous visit and c the age center.
"""

from typing import Sequence

import numpy as np
import pandas as pd

from app.core.exceptions import ContractViolation, NumericDomainError
from app.models.parameters import MedicationParams
from app.services.numerics import bernoulli_logpmf, inv_logit


def transition_logit(params: MedicationParams, m, age, prev_age, g_mu, age_center: float = 0.0):
    """Linear predictor of being on medication at `age`; vectorized over its arguments"""
    age = np.asarray(age, dtype=float)
    gap = age - np.asarray(prev_age, dtype=float)
    if np.any(gap <= 0):
        raise NumericDomainError(f"visit age must exceed the previous visit age (gap {gap})", float(np.min(gap)))
    m = np.asarray(m, dtype=float)
    a = params.alpha
    return ((a[0] + a[1] * m)
            + (a[2] + a[3] * m) * (age - age_center)
            + (a[4] + a[5] * m) * np.exp(-params.decay * gap)
            + (a[6] + a[7] * m) * np.asarray(g_mu, dtype=float))


def transition_prob(params: MedicationParams, m, age, prev_age, g_mu, age_center: float = 0.0):
    return inv_logit(transition_logit(params, m, age, prev_age, g_mu, age_center))


def med_loglik(params: MedicationParams, ages: Sequence[float], statuses: Sequence[int],
               g_mu: Sequence[float], age_center: float = 0.0) -> float:
    """
    Sum over consecutive visit pairs of log P(m_j | m_{j-1}); g_mu[j] is the
    risk-factor feature at visit j and enters the transition out of visit j.
    """
    statuses = np.asarray(statuses, dtype=int)
    if np.any((statuses != 0) & (statuses != 1)):
        raise ContractViolation(f"medication statuses must be resolved, got {statuses.tolist()}")
    if len(statuses) < 2:
        return 0.0
    ages = np.asarray(ages, dtype=float)
    g_mu = np.asarray(g_mu, dtype=float)
    logits = transition_logit(params, statuses[:-1], ages[1:], ages[:-1], g_mu[:-1], age_center)
    return float(np.sum(bernoulli_logpmf(statuses[1:], logits)))


def stationary_on_prob(params: MedicationParams, age, g_mu_off, g_mu_on, age_center: float = 0.0) -> float:
    """
    Long-run on-medication probability of the annual chain at `age`:
    p01 / (p01 + 1 - p11) with one-year gaps.
    """
    p01 = float(transition_prob(params, 0, age, age - 1, g_mu_off, age_center))
    p11 = float(transition_prob(params, 1, age, age - 1, g_mu_on, age_center))
    denominator = p01 + 1.0 - p11
    if denominator < 1e-300:
        return 0.5
    return p01 / denominator


def initial_status_logprob(params: MedicationParams, status: int, age, g_mu_off, g_mu_on,
                           age_center: float = 0.0) -> float:
    """log P(first status) for subjects whose first status is unobserved"""
    p_on = min(max(stationary_on_prob(params, age, g_mu_off, g_mu_on, age_center), 1e-300), 1.0 - 1e-16)
    return float(np.log(p_on if status == 1 else 1.0 - p_on))


def gap_decay_curve(params: MedicationParams, gaps: Sequence[float]) -> pd.DataFrame:
    """(a5 + a6 m) exp(-decay gap) for previous status off and on"""
    gaps = np.asarray(gaps, dtype=float)
    decay = np.exp(-params.decay * gaps)
    a = params.alpha
    return pd.DataFrame({"gap": gaps, "off_medication": a[4] * decay, "on_medication": (a[4] + a[5]) * decay})
