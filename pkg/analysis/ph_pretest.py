from dataclasses import dataclass

import numpy as np
from scipy import stats

from survival.kaplan_meier import KmCurve
from survival.risk_table import RiskTable, build_risk_table
from survival.sample import SurvivalSample
from utils.error_handler import ConstantTransform, InputError, TooFewEvents
from .cox_model import fit_table, residuals_from_table

TIME_TRANSFORMS = ('km', 'rank', 'identity', 'log')


@dataclass(frozen=True)
class GtResult:
    """Grambsch-Therneau trend test of the scaled Schoenfeld residuals."""
    statistic: float
    p_pre: float
    d: int
    transform: np.ndarray
    residuals: np.ndarray
    beta: float
    time_transform: str = 'km'


def _event_transform(table: RiskTable, time_transform: str) -> np.ndarray:
    """Transformed time for every event, tied events share a value."""
    if time_transform == 'km':
        survival = np.cumprod(1.0 - table.r / table.n.astype(float))
        s_minus = KmCurve(table.times, survival).left_limits_at_drops()
        values = 1.0 - s_minus
    elif time_transform == 'rank':
        return stats.rankdata(np.repeat(table.times, table.r))
    elif time_transform == 'identity':
        values = table.times.astype(float)
    elif time_transform == 'log':
        if np.any(table.times <= 0):
            raise InputError("log time transform needs positive event times", field='time_transform')
        values = np.log(table.times)
    else:
        raise InputError(f"unknown time transform {time_transform!r}", field='time_transform')
    return np.repeat(values, table.r)


def km_transform(sample: SurvivalSample) -> list:
    """g_k = 1 - S_pooled(t_k-) for every event k."""
    return _event_transform(build_risk_table(sample), 'km').tolist()


def gt_from_table(table: RiskTable, time_transform: str = 'km') -> GtResult:
    d = int(table.r.sum())
    if d < 2:
        raise TooFewEvents("PH pre-test needs at least two events")
    g = _event_transform(table, time_transform)
    centred = g - g.mean()
    spread = float(np.sum(centred ** 2))
    if not spread > 0:
        raise ConstantTransform("all events share one transformed time")

    fit = fit_table(table)
    _, residuals = residuals_from_table(table, fit)
    # average-information approximation: Var(s_k) ~ I / d
    u = float(np.sum(centred * residuals))
    statistic = d * u ** 2 / (fit.information * spread)
    return GtResult(statistic=statistic, p_pre=float(stats.chi2.sf(statistic, df=1)), d=d,
                    transform=g, residuals=residuals, beta=fit.beta,
                    time_transform=time_transform)


def gt_test(sample: SurvivalSample, time_transform: str = 'km') -> GtResult:
    """Two-sided test of the proportional hazards assumption."""
    sample.require_two_groups()
    return gt_from_table(build_risk_table(sample), time_transform)


if __name__ == "__main__":
    # Test run
    demo = SurvivalSample.from_groups(
        control=[(1, True), (3, True), (5, True), (7, True)],
        treatment=[(2, True), (4, False), (6, True), (8, True)],
    )
    print(f"GT test: {gt_test(demo)}")
