import math
from functools import lru_cache

import numpy as np
from scipy import stats
from scipy.stats import qmc

from utils.error_handler import InvalidCorrelation

CORR_TOL = 1e-8
# independent scrambles used for the error estimate
N_SCRAMBLES = 8


def validate_correlation(corr) -> np.ndarray:
    corr = np.atleast_2d(np.asarray(corr, dtype=float))
    k = corr.shape[0]
    if corr.shape != (k, k):
        raise InvalidCorrelation(f"correlation matrix must be square, got shape {corr.shape}")
    if not np.all(np.isfinite(corr)):
        raise InvalidCorrelation("correlation matrix has non-finite entries")
    if np.max(np.abs(np.diag(corr) - 1.0)) > CORR_TOL:
        raise InvalidCorrelation("correlation matrix diagonal must be 1")
    if np.max(np.abs(corr - corr.T)) > CORR_TOL:
        raise InvalidCorrelation("correlation matrix must be symmetric")
    if np.max(np.abs(corr)) > 1.0 + CORR_TOL:
        raise InvalidCorrelation("correlation entries must lie in [-1, 1]")
    return (corr + corr.T) / 2.0


def psd_factor(corr: np.ndarray) -> np.ndarray:
    """Square-root factor L with L @ L.T == corr.

    Eigenvalues slightly below zero from rounding are clipped, so singular
    matrices (perfect correlation) are fine.
    """
    eigval, eigvec = np.linalg.eigh(corr)
    return eigvec * np.sqrt(np.clip(eigval, 0.0, None))


@lru_cache(maxsize=32)
def _normal_points(k: int, n_per_scramble: int, seed: int) -> np.ndarray:
    """Standard normal RQMC points, shape (N_SCRAMBLES, n_per_scramble, k)."""
    m = max(1, math.ceil(math.log2(n_per_scramble)))
    seeds = np.random.SeedSequence(seed).spawn(N_SCRAMBLES)
    blocks = []
    for child in seeds:
        sobol = qmc.Sobol(d=k, scramble=True, seed=np.random.default_rng(child))
        u = sobol.random_base2(m)
        # keep away from 0 and 1 before the inverse cdf
        blocks.append(stats.norm.ppf(np.clip(u, 1e-16, 1.0 - 1e-16)))
    points = np.stack(blocks)
    points.setflags(write=False)
    return points


def mvn_tail_with_error(z_threshold: float, corr, draws: int = 200000, seed: int = 0) -> tuple:
    """P(max_i Z_i > z) for Z ~ N(0, corr), with its Monte Carlo standard error.

    Randomized quasi-Monte Carlo: several independently scrambled Sobol
    sequences, the spread of their estimates gives the error.
    """
    if draws < 1:
        raise ValueError("draws must be positive")
    corr = validate_correlation(corr)
    k = corr.shape[0]
    points = _normal_points(k, max(1, math.ceil(draws / N_SCRAMBLES)), int(seed))
    correlated = points @ psd_factor(corr).T
    exceed = (correlated.max(axis=2) > z_threshold).mean(axis=1)
    estimate = float(exceed.mean())
    se = float(exceed.std(ddof=1) / math.sqrt(N_SCRAMBLES))
    return min(1.0, max(0.0, estimate)), se


def mvn_tail(z_threshold: float, corr, draws: int = 200000, seed: int = 0) -> float:
    """1 - P(Z_1 <= z, ..., Z_k <= z); deterministic for fixed (draws, seed)."""
    return mvn_tail_with_error(z_threshold, corr, draws, seed)[0]


if __name__ == "__main__":
    # Test run
    p, se = mvn_tail_with_error(1.0, np.eye(2), draws=65536, seed=1)
    print(f"P(max > 1) for independent pair: {p:.5f} +- {se:.5f} (exact {1 - stats.norm.cdf(1.0) ** 2:.5f})")
