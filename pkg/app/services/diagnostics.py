"""
Convergence diagnostics and posterior summaries
"""

import logging
from typing import Dict, Mapping, Sequence

import numpy as np
import pandas as pd
from scipy.special import ndtri
from scipy.stats import rankdata

logger = logging.getLogger(__name__)

QUANTILES = (0.025, 0.975)


def _split_chains(draws: np.ndarray) -> np.ndarray:
    """(m, n) -> (2m, n // 2); the middle draw is dropped for odd n"""
    half = draws.shape[1] // 2
    return np.vstack([draws[:, :half], draws[:, draws.shape[1] - half:]])


def _basic_rhat(draws: np.ndarray) -> float:
    n = draws.shape[1]
    within = draws.var(axis=1, ddof=1).mean()
    between = n * draws.mean(axis=1).var(ddof=1)
    if within == 0.0:
        return 1.0 if between == 0.0 else float("inf")
    var_hat = (n - 1) / n * within + between / n
    return float(np.sqrt(var_hat / within))


def _rank_normalize(draws: np.ndarray) -> np.ndarray:
    ranks = rankdata(draws, method="average").reshape(draws.shape)
    return ndtri((ranks - 3.0 / 8.0) / (draws.size + 1.0 / 4.0))


def split_rhat(chains: np.ndarray) -> float:
    """
    Rank-normalized split R-hat: the larger of the bulk value (ranks of the draws)
    and the tail value (ranks of |draw - median|).
    chains: shape (n_chains, n_draws)
    """
    draws = np.asarray(chains, dtype=float)
    if draws.ndim != 2 or draws.shape[0] < 2:
        raise ValueError("R-hat needs at least two chains of equal length")
    if draws.shape[1] < 4:
        raise ValueError("R-hat needs at least four draws per chain")
    split = _split_chains(draws)
    if np.ptp(split) == 0.0:
        return 1.0
    bulk = _basic_rhat(_rank_normalize(split))
    folded = _basic_rhat(_rank_normalize(np.abs(split - np.median(split))))
    return max(bulk, folded)


def gelman_rubin(chains: Sequence[pd.DataFrame]) -> Dict[str, float]:
    """Split R-hat per parameter column across per-chain draw tables"""
    if len(chains) < 2:
        raise ValueError("R-hat needs at least two chains")
    lengths = {len(frame) for frame in chains}
    if len(lengths) != 1:
        raise ValueError(f"chains have unequal lengths {sorted(lengths)}")
    columns = list(chains[0].columns)
    rhat = {}
    for column in columns:
        stacked = np.vstack([frame[column].to_numpy(dtype=float) for frame in chains])
        rhat[column] = split_rhat(stacked)
    return rhat


def summarize(samples: Mapping[str, Sequence[float]]) -> pd.DataFrame:
    """
    Mean, SD and 2.5%/97.5% quantiles per parameter. Quantiles use numpy's
    linear interpolation between order statistics; SD uses ddof=1.
    """
    frame = pd.DataFrame(samples)
    if frame.empty or len(frame) == 0:
        raise ValueError("no draws to summarize")
    values = frame.to_numpy(dtype=float)
    sd = values.std(axis=0, ddof=1) if len(frame) > 1 else np.zeros(values.shape[1])
    lower, upper = np.quantile(values, QUANTILES, axis=0, method="linear")
    return pd.DataFrame({
        "mean": values.mean(axis=0),
        "sd": sd,
        "q025": lower,
        "q975": upper,
    }, index=frame.columns)


def failing_parameters(rhat: Mapping[str, float], threshold: float) -> Dict[str, float]:
    return {name: value for name, value in rhat.items() if not value < threshold}
