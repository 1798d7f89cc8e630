import numpy as np
import pytest
from scipy import stats

from analysis.max_combo import (LIN_WEIGHTS, MaxComboSpec, lin_combo, maxcombo_test, two_step_combo,
                                without_logrank)
from analysis.mvn_tail import mvn_tail, mvn_tail_with_error, psd_factor, validate_correlation
from analysis.weighted_logrank import weighted_logrank
from analysis.weights import FlemingHarrington, UnitWeight
from simulation.scenarios import REFERENCE_SCENARIOS
from simulation.trial_simulator import EventFraction, TrialDesign, simulate_trial
from utils.error_handler import InputError, InvalidCorrelation

from conftest import random_sample


def _close(p, se, exact):
    return abs(p - exact) <= 4 * se + 5e-4


@pytest.mark.parametrize('k', [1, 2, 4])
@pytest.mark.parametrize('z', [0.0, 1.0, 2.0])
def test_identity_correlation_closed_form(k, z):
    p, se = mvn_tail_with_error(z, np.eye(k), seed=3)
    assert _close(p, se, 1 - stats.norm.cdf(z) ** k)


def test_single_component_quantile():
    p, se = mvn_tail_with_error(1.959964, [[1.0]])
    assert _close(p, se, 0.025)


@pytest.mark.parametrize('z', [0.5, 1.5])
def test_perfect_correlation(z):
    p, se = mvn_tail_with_error(z, np.ones((2, 2)))
    assert _close(p, se, stats.norm.sf(z))


def test_mvn_deterministic_for_fixed_seed():
    corr = [[1.0, 0.6], [0.6, 1.0]]
    assert mvn_tail(1.2, corr, draws=4096, seed=11) == mvn_tail(1.2, corr, draws=4096, seed=11)


def test_invalid_correlation():
    with pytest.raises(InvalidCorrelation):
        validate_correlation([[2.0, 0.0], [0.0, 1.0]])
    with pytest.raises(InvalidCorrelation):
        validate_correlation([[1.0, 1.5], [1.5, 1.0]])
    with pytest.raises(InvalidCorrelation):
        validate_correlation([[1.0, 0.2], [0.3, 1.0]])


def test_psd_factor_reconstructs_singular_matrix():
    corr = np.ones((3, 3))
    factor = psd_factor(corr)
    np.testing.assert_allclose(factor @ factor.T, corr, atol=1e-12)


def test_combo_helpers():
    assert lin_combo().components == LIN_WEIGHTS
    assert lin_combo().includes_logrank()
    assert not two_step_combo().includes_logrank()
    assert without_logrank(lin_combo()).components == LIN_WEIGHTS[1:]
    with pytest.raises(InputError):
        MaxComboSpec((FlemingHarrington(1, 0),))
    with pytest.raises(InputError):
        MaxComboSpec((FlemingHarrington(1, 0), FlemingHarrington(1, 0)))


def test_identical_weights_collapse_to_component(interleaved_sample):
    spec = MaxComboSpec((UnitWeight(), FlemingHarrington(0, 0)), mvn_draws=65536)
    result = maxcombo_test(interleaved_sample, spec)
    np.testing.assert_allclose(result.corr, np.ones((2, 2)), atol=1e-12)
    expected = weighted_logrank(interleaved_sample, UnitWeight()).p_one_sided
    assert result.p_adjusted == pytest.approx(expected, rel=0.02)


def test_oriented_statistics(interleaved_sample):
    result = maxcombo_test(interleaved_sample, lin_combo(mvn_draws=16384))
    for z, spec in zip(result.z_oriented, LIN_WEIGHTS):
        assert z == pytest.approx(-weighted_logrank(interleaved_sample, spec).z)
    assert result.z_max == pytest.approx(result.z_oriented.max())
    assert np.all(np.diag(result.corr) == 1.0)


def assert_within_bonferroni_bounds(result, draws):
    k = len(result.z_oriented)
    p_min = result.p_components.min()
    slack = 3 * result.p_raw_se + 1.0 / draws
    assert p_min - slack <= result.p_raw <= k * p_min + slack
    assert result.p_adjusted == pytest.approx(float(np.clip(result.p_raw, p_min, min(1.0, k * p_min))))


@pytest.mark.parametrize('seed', range(25))
def test_bonferroni_sandwich(seed):
    trial = simulate_trial(REFERENCE_SCENARIOS['delayed_long'],
                           TrialDesign(120, 13.14, EventFraction(0.75)), seed)
    result = maxcombo_test(trial.sample, lin_combo(mvn_draws=16384))
    assert_within_bonferroni_bounds(result, 16384)


@pytest.mark.parametrize('seed', range(3))
def test_component_order_does_not_matter(seed):
    sample = random_sample(seed, n=40)
    forward = maxcombo_test(sample, MaxComboSpec(LIN_WEIGHTS, mvn_draws=16384, mvn_seed=5))
    backward = maxcombo_test(sample, MaxComboSpec(LIN_WEIGHTS[::-1], mvn_draws=16384, mvn_seed=5))
    assert backward.p_adjusted == pytest.approx(forward.p_adjusted, abs=1e-12)
    np.testing.assert_allclose(backward.z_oriented, forward.z_oriented[::-1])
    np.testing.assert_allclose(backward.corr, forward.corr[::-1, ::-1])


def test_symmetric_groups_two_components(symmetric_sample):
    spec = MaxComboSpec((FlemingHarrington(1, 0), FlemingHarrington(0, 1)), mvn_draws=65536)
    result = maxcombo_test(symmetric_sample, spec)
    np.testing.assert_allclose(result.z_oriented, 0.0, atol=1e-12)
    rho = result.corr[0, 1]
    # orthant probability of a bivariate normal at zero
    exact = 0.75 - np.arcsin(rho) / (2 * np.pi)
    assert abs(result.p_raw - exact) <= 3 * result.p_raw_se + 1.0 / 65536
    p, se = mvn_tail_with_error(0.0, np.eye(2), draws=65536)
    assert abs(p - 0.75) <= 3 * se + 1.0 / 65536


@pytest.mark.parametrize('draws', [4096, 65536])
@pytest.mark.parametrize('z,corr', [
    (1.0, np.eye(2)),
    (2.0, np.eye(2)),
    (2.5, np.eye(4)),
    (1.5, np.full((3, 3), 0.5) + 0.5 * np.eye(3)),
])
def test_mvn_standard_error_bound(draws, z, corr):
    _, se = mvn_tail_with_error(z, corr, draws=draws, seed=2)
    assert 0.0 <= se <= 0.5 / np.sqrt(draws)


@pytest.mark.parametrize('seed', range(10))
def test_rank_invariance(seed):
    sample = random_sample(seed)
    stretched = sample.with_times(sample.time ** 3 + sample.time)
    spec = lin_combo(mvn_draws=8192, mvn_seed=3)
    a = maxcombo_test(sample, spec)
    b = maxcombo_test(stretched, spec)
    np.testing.assert_allclose(a.z_oriented, b.z_oriented, atol=1e-9)
    assert abs(a.p_adjusted - b.p_adjusted) < 1e-9
