import math

import numpy as np
import pytest
from scipy import optimize

from analysis.cox_model import (fit_cox_binary, fit_table, partial_loglik, residuals_from_table,
                                schoenfeld_residuals)
from survival.risk_table import build_risk_table
from survival.sample import SurvivalSample
from utils.error_handler import MonotoneLikelihood, NotConverged, TooFewEvents

from conftest import random_sample


def brute_force_loglik(records, beta):
    """Breslow partial log-likelihood straight from (time, event, x) triples."""
    total = 0.0
    for t in sorted({s for s, e, _ in records if e}):
        at_risk = [x for s, _, x in records if s >= t]
        events = [x for s, e, x in records if s == t and e]
        total += beta * sum(events) - len(events) * math.log(sum(math.exp(beta * x) for x in at_risk))
    return total


def grid_oracle(records):
    grid = np.linspace(-10, 10, 2001)
    values = [brute_force_loglik(records, b) for b in grid]
    start = grid[int(np.argmax(values))]
    res = optimize.minimize_scalar(lambda b: -brute_force_loglik(records, b),
                                   bounds=(start - 0.02, start + 0.02), method='bounded',
                                   options={'xatol': 1e-10})
    return res.x


def test_identical_groups_give_zero(symmetric_sample):
    fit = fit_cox_binary(symmetric_sample)
    assert abs(fit.beta) < 1e-9
    assert fit.converged


SMALL_DATASETS = [
    ([(1, True), (3, True), (5, False)], [(2, True), (4, True), (6, True)]),
    ([(1, True), (2, True), (2, True)], [(2, True), (3, False), (4, True)]),
    ([(1, True), (4, True)], [(2, True), (3, True)]),
    ([(1, True), (2, False), (3, True)], [(1, True), (5, True), (6, False)]),
]


@pytest.mark.parametrize('control,treatment', SMALL_DATASETS)
def test_fit_matches_grid_search(control, treatment):
    sample = SurvivalSample.from_groups(control, treatment)
    records = [(r.time, r.event, int(r.group)) for r in sample.records()]
    fit = fit_cox_binary(sample)
    assert fit.beta == pytest.approx(grid_oracle(records), abs=1e-6)
    assert fit.loglik == pytest.approx(brute_force_loglik(records, fit.beta), abs=1e-9)


@pytest.mark.parametrize('seed', range(5))
def test_partial_loglik_matches_brute_force(seed):
    sample = random_sample(seed, n=12)
    records = [(r.time, r.event, int(r.group)) for r in sample.records()]
    table = build_risk_table(sample)
    for beta in (-1.5, 0.0, 0.7):
        assert partial_loglik(table, beta) == pytest.approx(brute_force_loglik(records, beta), abs=1e-9)


def test_monotone_likelihood():
    sample = SurvivalSample.from_groups(
        control=[(1, True), (2, True), (3, True)],
        treatment=[(4, False), (5, False), (6, False)],
    )
    with pytest.raises(MonotoneLikelihood):
        fit_cox_binary(sample)


def test_too_few_events():
    sample = SurvivalSample.from_groups(control=[(1, True)], treatment=[(2, False)])
    with pytest.raises(TooFewEvents):
        fit_cox_binary(sample)


def test_residuals_balanced_at_zero(symmetric_sample):
    fit = fit_cox_binary(symmetric_sample)
    residuals = schoenfeld_residuals(symmetric_sample, fit)
    assert [t for t, _ in residuals] == [1.0, 1.0, 2.0, 2.0, 4.0, 4.0]
    np.testing.assert_allclose([s for _, s in residuals], [0.5, -0.5] * 3, atol=1e-9)


@pytest.mark.parametrize('seed', range(10))
def test_residuals_sum_to_zero(seed):
    sample = random_sample(seed)
    fit = fit_cox_binary(sample)
    residuals = schoenfeld_residuals(sample, fit)
    assert len(residuals) == sample.n_events
    assert abs(sum(s for _, s in residuals)) < 1e-8


def test_residuals_match_hand_evaluation(interleaved_sample):
    fit = fit_cox_binary(interleaved_sample)
    e = math.exp(fit.beta)
    # (time, x, n0, n1) per event
    rows = [(1, 0, 3, 3), (2, 1, 2, 3), (3, 0, 2, 2), (4, 1, 1, 2), (5, 0, 1, 1), (6, 1, 0, 1)]
    expected = [x - n1 * e / (n0 + n1 * e) for _, x, n0, n1 in rows]
    got = schoenfeld_residuals(interleaved_sample, fit)
    np.testing.assert_allclose([s for _, s in got], expected, atol=1e-10)


def test_residuals_need_converged_fit(interleaved_sample):
    table = build_risk_table(interleaved_sample)
    fit = fit_table(table)
    unconverged = type(fit)(beta=fit.beta, se=fit.se, information=fit.information, loglik=fit.loglik,
                            iterations=fit.iterations, converged=False, score=1.0)
    with pytest.raises(NotConverged):
        residuals_from_table(table, unconverged)
