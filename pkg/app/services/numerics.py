"""
Shared numerical kernels: B-spline basis, 15-point Gauss-Kronrod rule,
skew-normal log density and logistic helpers
"""

from dataclasses import dataclass, field
from typing import Callable, Sequence, Tuple

import numpy as np
from scipy.interpolate import BSpline
from scipy.special import expit, log_expit, log_ndtr

from app.core.exceptions import NumericDomainError

LOG_2 = np.log(2.0)
LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class BSplineBasis:
    """
    Clamped B-spline basis of degree q on [lo, hi] with D = D_interior + q - 1
    functions. The full clamped basis has D_interior + q + 1 functions; the
    first two and the last two are merged, which keeps the partition of unity
    and makes the log baseline hazard flat at both boundaries.
    """
    degree: int
    interior_knots: Tuple[float, ...]
    lo: float
    hi: float
    _spline: BSpline = field(init=False, repr=False, compare=False)
    _collapse: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        knots = tuple(float(k) for k in self.interior_knots)
        object.__setattr__(self, "interior_knots", knots)
        if self.degree < 1:
            raise NumericDomainError(f"spline degree must be >= 1, got {self.degree}", self.degree)
        if not self.lo < self.hi:
            raise NumericDomainError(f"empty basis boundary [{self.lo}, {self.hi}]")
        if any(not (self.lo < k < self.hi) for k in knots) or any(np.diff(knots) <= 0):
            raise NumericDomainError(f"interior knots must be sorted and strictly inside ({self.lo}, {self.hi})")
        if self.n_basis < 1:
            raise NumericDomainError(
                f"degree {self.degree} with {len(knots)} interior knots gives no basis functions")

        q = self.degree
        full_knots = np.r_[[self.lo] * (q + 1), knots, [self.hi] * (q + 1)]
        n_full = len(full_knots) - q - 1
        object.__setattr__(self, "_spline", BSpline(full_knots, np.eye(n_full), q, extrapolate=False))

        collapse = np.zeros((n_full, self.n_basis))
        collapse[0, 0] = collapse[1, 0] = 1.0
        for k in range(2, n_full - 2):
            collapse[k, k - 1] = 1.0
        collapse[n_full - 2, -1] = collapse[n_full - 1, -1] = 1.0
        object.__setattr__(self, "_collapse", collapse)

    @property
    def n_basis(self) -> int:
        return len(self.interior_knots) + self.degree - 1

    def full_basis(self, t) -> np.ndarray:
        """Uncollapsed clamped basis, shape (len(t), D_interior + q + 1)"""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        self._check_domain(t)
        values = self._spline(t)
        return np.nan_to_num(values, nan=0.0)

    def evaluate(self, t) -> np.ndarray:
        """Basis values, shape (len(t), D)"""
        return self.full_basis(t) @ self._collapse

    def _check_domain(self, t: np.ndarray):
        outside = (t < self.lo) | (t > self.hi) | ~np.isfinite(t)
        if outside.any():
            bad = float(t[outside][0])
            raise NumericDomainError(f"age {bad} outside spline boundary [{self.lo}, {self.hi}]", bad)


def bspline_eval(basis: BSplineBasis, t: float) -> np.ndarray:
    """Vector of D basis values at a single age"""
    return basis.evaluate(t)[0]


def make_basis(first_ages: Sequence[float], event_times: Sequence[float],
               degree: int = 3, n_interior: int = 2) -> BSplineBasis:
    """
    Default basis for a cohort: boundary at the minimum baseline age and the
    maximum event age, interior knots at equally spaced quantiles of the
    event/censoring ages (33rd/66th percentiles for two knots).
    """
    lo = float(np.min(first_ages))
    hi = float(np.max(event_times))
    if hi <= lo:
        hi = lo + 1.0
    probs = np.arange(1, n_interior + 1) / (n_interior + 1)
    knots = np.quantile(np.asarray(event_times, dtype=float), probs) if n_interior else np.array([])
    knots = np.unique(knots)
    if len(knots) != n_interior or np.any(knots <= lo) or np.any(knots >= hi):
        # quantiles collide with the boundary on tiny cohorts
        knots = lo + (hi - lo) * probs
    return BSplineBasis(degree=degree, interior_knots=tuple(knots), lo=lo, hi=hi)


# 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15 constants)
_GK15_POSITIVE_NODES = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
])
_GK15_POSITIVE_WEIGHTS = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
])
_GK15_CENTER_WEIGHT = 0.209482141084727828012999174891714


@dataclass(frozen=True)
class GKRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return len(self.nodes)

    def scaled_nodes(self, lo: float, hi: float) -> np.ndarray:
        return (hi - lo) * (1.0 + self.nodes) / 2.0 + lo


def gk15() -> GKRule:
    nodes = np.r_[-_GK15_POSITIVE_NODES, 0.0, _GK15_POSITIVE_NODES[::-1]]
    weights = np.r_[_GK15_POSITIVE_WEIGHTS, _GK15_CENTER_WEIGHT, _GK15_POSITIVE_WEIGHTS[::-1]]
    return GKRule(nodes=nodes, weights=weights)


GK15 = gk15()


def gk_integrate(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, rule: GKRule = GK15) -> float:
    """Integral of a vectorized integrand over [lo, hi] with one application of the rule"""
    if lo > hi:
        raise NumericDomainError(f"integration bounds reversed: [{lo}, {hi}]", lo)
    if lo == hi:
        return 0.0
    ages = rule.scaled_nodes(lo, hi)
    values = np.asarray(f(ages), dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        node = float(ages[bad][0])
        raise NumericDomainError(f"integrand not finite at age {node}", node)
    return float((hi - lo) / 2.0 * np.dot(rule.weights, values))


def skew_normal_logpdf(x, location, scale: float, shape: float):
    """
    log[2/omega * phi(z) * Phi(nu z)], z = (x - location)/omega.
    log Phi uses scipy.special.log_ndtr, accurate to double precision in both tails.
    """
    if not np.all(np.asarray(scale) > 0):
        raise NumericDomainError(f"skew-normal scale must be positive, got {scale}", float(np.min(scale)))
    z = (np.asarray(x, dtype=float) - location) / scale
    return LOG_2 - np.log(scale) - LOG_SQRT_2PI - 0.5 * z * z + log_ndtr(shape * z)


def inv_logit(x):
    return expit(x)


def log_inv_logit(x):
    """log of inv_logit, stable for large |x|"""
    return log_expit(x)


def bernoulli_logpmf(outcome, logit):
    """log P(outcome) for a Bernoulli with the given logit"""
    outcome = np.asarray(outcome, dtype=float)
    return np.where(outcome > 0.5, log_expit(logit), log_expit(-np.asarray(logit, dtype=float)))
