from dataclasses import dataclass

import numpy as np

from survival.risk_table import RiskTable, build_risk_table
from survival.sample import SurvivalSample
from utils.error_handler import MonotoneLikelihood, NotConverged, TooFewEvents

SCORE_TOL = 1e-9
MAX_ITER = 25
MAX_ABS_BETA = 20.0


@dataclass(frozen=True)
class CoxFit:
    beta: float
    se: float
    information: float
    loglik: float
    iterations: int
    converged: bool
    score: float = 0.0


def _treatment_share(table: RiskTable, beta: float) -> np.ndarray:
    """Risk-set mean of the treatment indicator, exp(beta)-weighted."""
    n1 = table.n1.astype(float)
    n0 = table.n - n1
    # written with exp(-|beta|) to stay finite for large |beta|
    if beta >= 0:
        return n1 / (n0 * np.exp(-beta) + n1)
    return n1 * np.exp(beta) / (n0 + n1 * np.exp(beta))


def partial_loglik(table: RiskTable, beta: float) -> float:
    """Breslow partial log-likelihood for a single binary covariate."""
    n1 = table.n1.astype(float)
    n0 = table.n - n1
    # log(n0 + n1 e^beta) without overflow; log(0) = -inf is intended
    with np.errstate(divide='ignore'):
        log_denominator = np.logaddexp(np.log(n0), np.log(n1) + beta)
    return float(np.sum(beta * table.r1 - table.r * log_denominator))


def score_and_information(table: RiskTable, beta: float) -> tuple:
    share = _treatment_share(table, beta)
    score = float(np.sum(table.r1 - table.r * share))
    information = float(np.sum(table.r * share * (1.0 - share)))
    return score, information


def fit_table(table: RiskTable) -> CoxFit:
    """Newton-Raphson with step halving on the Breslow partial likelihood."""
    if int(table.r.sum()) < 2:
        raise TooFewEvents("Cox model needs at least two events")
    # the score decreases in beta; a root exists iff its limits have opposite signs
    score_up = float(np.sum(table.r1 - table.r * (table.n1 > 0)))
    score_down = float(np.sum(table.r1 - table.r * (table.n1 == table.n)))
    if not (score_down > 0 > score_up):
        raise MonotoneLikelihood("partial likelihood is monotone in beta; no finite estimate")

    beta = 0.0
    loglik = partial_loglik(table, beta)
    score, information = score_and_information(table, beta)
    iterations = 0
    while abs(score) >= SCORE_TOL and iterations < MAX_ITER:
        if not information > 0:
            raise MonotoneLikelihood("partial likelihood carries no information about beta")
        step = score / information
        new_beta = beta + step
        new_loglik = partial_loglik(table, new_beta)
        halvings = 0
        while new_loglik < loglik - 1e-12 and halvings < 30:
            step /= 2.0
            new_beta = beta + step
            new_loglik = partial_loglik(table, new_beta)
            halvings += 1
        beta, loglik = new_beta, new_loglik
        iterations += 1
        if abs(beta) > MAX_ABS_BETA:
            raise MonotoneLikelihood(f"|beta| exceeded {MAX_ABS_BETA:g}; the score never vanishes")
        score, information = score_and_information(table, beta)

    converged = abs(score) < SCORE_TOL
    if not information > 0:
        raise MonotoneLikelihood("observed information is zero at the estimate")
    return CoxFit(beta=beta, se=float(information ** -0.5), information=information,
                  loglik=loglik, iterations=iterations, converged=converged, score=score)


def fit_cox_binary(sample: SurvivalSample) -> CoxFit:
    """Cox model with the treatment indicator as the only covariate."""
    sample.require_two_groups()
    return fit_table(build_risk_table(sample))


def residuals_from_table(table: RiskTable, fit: CoxFit) -> tuple:
    """Event times and Schoenfeld residuals, one per event (ties repeated)."""
    if not fit.converged:
        raise NotConverged(f"Cox fit did not converge (score {fit.score:.3g})")
    share = _treatment_share(table, fit.beta)
    times = np.repeat(table.times, table.r)
    expected = np.repeat(share, table.r)
    # inside each tied block the treatment events come first
    covariate = np.concatenate([
        np.r_[np.ones(r1), np.zeros(r - r1)] for r, r1 in zip(table.r, table.r1)
    ])
    return times, covariate - expected


def schoenfeld_residuals(sample: SurvivalSample, fit: CoxFit) -> list:
    """List of (event time, x_k - xbar(t_k, beta))."""
    times, residuals = residuals_from_table(build_risk_table(sample), fit)
    return list(zip(times.tolist(), residuals.tolist()))


if __name__ == "__main__":
    # Test run
    demo = SurvivalSample.from_groups(
        control=[(1, True), (3, True), (5, False)],
        treatment=[(2, True), (4, True), (6, True)],
    )
    fit = fit_cox_binary(demo)
    print(f"Cox fit: {fit}")
    print(f"Schoenfeld residuals: {schoenfeld_residuals(demo, fit)}")
