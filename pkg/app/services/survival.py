"""
Hazard submodel: B-spline log baseline, covariate effects, risk-factor and
medication features discounted after the last visit, cumulative hazard by
piecewise Gauss-Kronrod quadrature and the event log-likelihood
"""

from dataclasses import dataclass, field
from typing import Callable, Sequence, Tuple

import numpy as np

from app.core.exceptions import NumericDomainError
from app.models.parameters import HazardParams
from app.services.numerics import GK15, BSplineBasis, GKRule, gk_integrate

Feature = Callable[[np.ndarray], np.ndarray]


def log_baseline_hazard(params: HazardParams, basis: BSplineBasis, t):
    values = params.kappa0 + basis.evaluate(t) @ params.kappa
    return float(values[0]) if np.ndim(t) == 0 else values


def staleness(rate: float, t, last_visit_age: float):
    """exp(-rate (t - last visit)) after the last visit, 1 up to it"""
    elapsed = np.maximum(np.asarray(t, dtype=float) - last_visit_age, 0.0)
    result = np.exp(-rate * elapsed)
    return float(result) if result.ndim == 0 else result


@dataclass(frozen=True)
class FeaturePath:
    """
    What the hazard needs from one subject: covariate contrasts, the last visit age
    and the two features as vectorized functions of age. Features are read at
    min(t, last visit age) by the callables themselves.
    """
    x: np.ndarray
    last_age: float
    g_mu: Feature
    g_m: Feature
    breakpoints: Tuple[float, ...] = field(default=())

    @classmethod
    def constant(cls, x: Sequence[float], last_age: float, g_mu: float, g_m: float) -> "FeaturePath":
        return cls(
            x=np.asarray(x, dtype=float),
            last_age=float(last_age),
            g_mu=lambda t: np.full(np.shape(t), float(g_mu)),
            g_m=lambda t: np.full(np.shape(t), float(g_m)),
        )


def log_hazard(params: HazardParams, basis: BSplineBasis, path: FeaturePath, t):
    """log h0(t) + x beta_h + lambda_mu u_mu g_mu + lambda_m u_m g_m; vectorized over t"""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    values = (log_baseline_hazard(params, basis, t_arr)
              + path.x @ params.beta_h
              + params.lambda_mu * staleness(params.rho_mu, t_arr, path.last_age) * path.g_mu(t_arr)
              + params.lambda_m * staleness(params.rho_m, t_arr, path.last_age) * path.g_m(t_arr))
    return float(values[0]) if np.ndim(t) == 0 else values


def integration_pieces(lo: float, hi: float, breakpoints: Sequence[float]) -> np.ndarray:
    """[lo, hi] split at every breakpoint strictly inside it"""
    inner = [b for b in breakpoints if lo < b < hi]
    return np.unique(np.r_[lo, inner, hi])


def quadrature_nodes(lo: float, hi: float, breakpoints: Sequence[float],
                     rule: GKRule = GK15) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of one GK application per piece of [lo, hi]"""
    edges = integration_pieces(lo, hi, breakpoints)
    if len(edges) < 2:
        return np.empty(0), np.empty(0)
    nodes = np.concatenate([rule.scaled_nodes(a, b) for a, b in zip(edges[:-1], edges[1:])])
    weights = np.concatenate([(b - a) / 2.0 * rule.weights for a, b in zip(edges[:-1], edges[1:])])
    return nodes, weights


def cumulative_hazard(params: HazardParams, basis: BSplineBasis, path: FeaturePath, lo: float, hi: float,
                      rule: GKRule = GK15) -> float:
    """Integral of the hazard over [lo, hi], one GK application per smooth piece"""
    if lo > hi:
        raise NumericDomainError(f"cumulative hazard bounds reversed: [{lo}, {hi}]", lo)
    edges = integration_pieces(lo, hi, (*path.breakpoints, path.last_age))
    integrand = lambda s: np.exp(log_hazard(params, basis, path, s))
    return float(sum(gk_integrate(integrand, a, b, rule) for a, b in zip(edges[:-1], edges[1:])))


def event_loglik(params: HazardParams, basis: BSplineBasis, path: FeaturePath, event_time: float,
                 event_indicator: int, entry_age: float, rule: GKRule = GK15) -> float:
    """delta log h(T) - H(entry, T); entry is the first visit age (delayed entry)"""
    if event_time < entry_age:
        raise NumericDomainError(f"event time {event_time} before entry age {entry_age}", event_time)
    value = -cumulative_hazard(params, basis, path, entry_age, event_time, rule)
    if event_indicator:
        value += log_hazard(params, basis, path, event_time)
    return value


@dataclass(frozen=True)
class EventDesign:
    """
    Quadrature nodes and features of one subject frozen for fixed latent state.
    Re-evaluating the event term for new hazard parameters is then a dot product.
    """
    x: np.ndarray
    event_indicator: int
    event_time: float
    nodes: np.ndarray
    node_weights: np.ndarray
    node_basis: np.ndarray
    node_g_mu: np.ndarray
    node_g_m: np.ndarray
    node_elapsed: np.ndarray
    event_basis: np.ndarray
    event_g_mu: float
    event_g_m: float
    event_elapsed: float

    @classmethod
    def build(cls, basis: BSplineBasis, path: FeaturePath, entry_age: float, event_time: float,
              event_indicator: int, rule: GKRule = GK15) -> "EventDesign":
        if event_time < entry_age:
            raise NumericDomainError(f"event time {event_time} before entry age {entry_age}", event_time)
        nodes, weights = quadrature_nodes(entry_age, event_time, (*path.breakpoints, path.last_age), rule)
        t = np.array([event_time])
        return cls(
            x=path.x,
            event_indicator=int(event_indicator),
            event_time=float(event_time),
            nodes=nodes,
            node_weights=weights,
            node_basis=basis.evaluate(nodes) if len(nodes) else np.empty((0, basis.n_basis)),
            node_g_mu=path.g_mu(nodes),
            node_g_m=path.g_m(nodes),
            node_elapsed=np.maximum(nodes - path.last_age, 0.0),
            event_basis=basis.evaluate(t)[0],
            event_g_mu=float(path.g_mu(t)[0]),
            event_g_m=float(path.g_m(t)[0]),
            event_elapsed=max(event_time - path.last_age, 0.0),
        )

    def _log_hazard_nodes(self, params: HazardParams) -> np.ndarray:
        return (params.kappa0 + self.node_basis @ params.kappa + self.x @ params.beta_h
                + params.lambda_mu * np.exp(-params.rho_mu * self.node_elapsed) * self.node_g_mu
                + params.lambda_m * np.exp(-params.rho_m * self.node_elapsed) * self.node_g_m)

    def log_hazard_at_event(self, params: HazardParams) -> float:
        return float(params.kappa0 + self.event_basis @ params.kappa + self.x @ params.beta_h
                     + params.lambda_mu * np.exp(-params.rho_mu * self.event_elapsed) * self.event_g_mu
                     + params.lambda_m * np.exp(-params.rho_m * self.event_elapsed) * self.event_g_m)

    def cumulative_hazard(self, params: HazardParams) -> float:
        """Overflow gives +inf, so proposals with exploding hazards are simply rejected"""
        with np.errstate(over="ignore"):
            values = np.exp(self._log_hazard_nodes(params))
        return float(self.node_weights @ values)

    def loglik(self, params: HazardParams) -> float:
        value = -self.cumulative_hazard(params)
        if self.event_indicator:
            value += self.log_hazard_at_event(params)
        return value
