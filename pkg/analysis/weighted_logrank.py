from dataclasses import dataclass

import numpy as np
from scipy import stats

from survival.kaplan_meier import pooled_km
from survival.risk_table import RiskTable, build_risk_table
from survival.sample import SurvivalSample
from utils.error_handler import ZeroVariance
from .weights import WeightSpec, compute_weights


@dataclass(frozen=True)
class WlrtResult:
    """Standardized weighted log-rank statistic.

    Sign convention: fewer treatment events than expected (benefit) gives
    z < 0, so the one-sided p-value in the benefit direction is Phi(z).
    """
    z: float
    numerator: float
    variance: float
    p_one_sided: float
    p_two_sided: float
    weights: np.ndarray


def p_values(z: float) -> tuple:
    lower = float(stats.norm.cdf(z))
    upper = float(stats.norm.sf(z))
    return lower, min(1.0, 2.0 * min(lower, upper))


def logrank_from_table(table: RiskTable, weights: np.ndarray) -> WlrtResult:
    """Weighted log-rank statistic for precomputed weights.

    Any positive rescaling of `weights` leaves z unchanged.
    """
    weights = np.asarray(weights, dtype=float)
    numerator = float(np.sum(weights * table.observed_minus_expected()))
    variance = float(np.sum(weights ** 2 * table.hypergeometric_variance()))
    if not variance > 0:
        raise ZeroVariance("weighted log-rank variance is zero")
    z = numerator / np.sqrt(variance)
    p_one, p_two = p_values(z)
    return WlrtResult(z=z, numerator=numerator, variance=variance,
                      p_one_sided=p_one, p_two_sided=p_two, weights=weights)


def weighted_logrank(sample: SurvivalSample, spec: WeightSpec) -> WlrtResult:
    """Weighted log-rank test with weights from the pooled KM curve."""
    sample.require_two_groups()
    table = build_risk_table(sample)
    weights = compute_weights(spec, table, pooled_km(sample))
    return logrank_from_table(table, weights)


def covariance_from_table(table: RiskTable, weights_a: np.ndarray, weights_b: np.ndarray) -> tuple:
    v = table.hypergeometric_variance()
    cov = float(np.sum(weights_a * weights_b * v))
    var_a = float(np.sum(weights_a ** 2 * v))
    var_b = float(np.sum(weights_b ** 2 * v))
    if not (var_a > 0 and var_b > 0):
        raise ZeroVariance("a marginal weighted log-rank variance is zero")
    corr = cov / np.sqrt(var_a * var_b)
    return cov, float(np.clip(corr, -1.0, 1.0))


def wlrt_covariance(sample: SurvivalSample, a: WeightSpec, b: WeightSpec) -> tuple:
    """Null covariance and correlation of two weighted statistics."""
    sample.require_two_groups()
    table = build_risk_table(sample)
    km = pooled_km(sample)
    return covariance_from_table(table, compute_weights(a, table, km), compute_weights(b, table, km))


if __name__ == "__main__":
    # Test run
    from .weights import FlemingHarrington, UnitWeight
    demo = SurvivalSample.from_groups(
        control=[(1, True), (3, True), (5, True)],
        treatment=[(2, True), (4, True), (6, True)],
    )
    print(f"Log-rank: {weighted_logrank(demo, UnitWeight())}")
    print(f"Cov LR vs FH(0,1): {wlrt_covariance(demo, UnitWeight(), FlemingHarrington(0, 1))}")
