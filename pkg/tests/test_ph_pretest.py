import numpy as np
import pytest
from scipy import stats

from analysis.ph_pretest import gt_test, km_transform
from survival.sample import SurvivalSample
from simulation.scenarios import PHScenario
from simulation.trial_simulator import EventFraction, TrialDesign, simulate_trial
from utils.error_handler import ConstantTransform, InputError, TooFewEvents

from conftest import random_sample


def test_km_transform_distinct_events():
    sample = SurvivalSample.from_groups(control=[(1, True), (3, True)], treatment=[(2, True), (4, True)])
    np.testing.assert_allclose(km_transform(sample), [0.0, 0.25, 0.5, 0.75])


def test_km_transform_with_censoring_and_ties():
    sample = SurvivalSample.from_groups(
        control=[(1, True), (2, False), (3, True)],
        treatment=[(1, True), (3, True), (4, False)],
    )
    # S(1) = 4/6; at 3 the risk set is {3, 3, 4}
    np.testing.assert_allclose(km_transform(sample), [0.0, 0.0, 1 / 3, 1 / 3])


def test_single_event_time_is_constant():
    sample = SurvivalSample.from_groups(control=[(1, True), (2, False)], treatment=[(1, True), (2, False)])
    with pytest.raises(ConstantTransform):
        gt_test(sample)


def test_too_few_events():
    sample = SurvivalSample.from_groups(control=[(1, True)], treatment=[(2, False)])
    with pytest.raises(TooFewEvents):
        gt_test(sample)


def test_unknown_transform(interleaved_sample):
    with pytest.raises(InputError):
        gt_test(interleaved_sample, 'sqrt')


@pytest.mark.parametrize('seed', range(10))
def test_rank_invariance_with_km_transform(seed):
    sample = random_sample(seed)
    a = gt_test(sample)
    b = gt_test(sample.with_times(sample.time ** 3 + sample.time))
    assert abs(a.statistic - b.statistic) < 1e-12
    assert abs(a.p_pre - b.p_pre) < 1e-12


@pytest.mark.parametrize('seed', range(10))
def test_label_swap_invariance(seed):
    sample = random_sample(seed)
    a = gt_test(sample)
    b = gt_test(sample.with_groups(1 - sample.group))
    assert b.statistic == pytest.approx(a.statistic, rel=1e-7, abs=1e-9)
    assert b.beta == pytest.approx(-a.beta, abs=1e-8)


@pytest.mark.parametrize('transform', ['km', 'rank', 'identity', 'log'])
def test_statistic_form(transform):
    sample = random_sample(4)
    result = gt_test(sample, transform)
    assert result.d == sample.n_events
    assert result.statistic >= 0
    assert result.p_pre == pytest.approx(stats.chi2.sf(result.statistic, df=1))
    assert len(result.transform) == len(result.residuals) == result.d


def test_rejection_rate_under_ph():
    design = TrialDesign(200, 13.14, EventFraction(0.75))
    rejected = 0
    reps = 300
    for rep in range(reps):
        trial = simulate_trial(PHScenario(12.0, 18.0), design, 17, rep)
        rejected += gt_test(trial.sample).p_pre <= 0.05
    # 0.05 +- 3 binomial SE
    assert abs(rejected / reps - 0.05) <= 3 * np.sqrt(0.05 * 0.95 / reps)
