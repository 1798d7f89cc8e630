import numpy as np
import pytest
from scipy import stats

from analysis.weighted_logrank import logrank_from_table, weighted_logrank, wlrt_covariance
from analysis.weights import (FlemingHarrington, Modest, UnitWeight, compute_weights,
                              is_unit_equivalent, parse_weight_spec, weight_to_dict)
from survival.kaplan_meier import pooled_km
from survival.risk_table import build_risk_table
from survival.sample import SurvivalSample
from utils.error_handler import DegenerateWeight, InputError, ZeroVariance

from conftest import random_sample


def brute_force_z(records, weight_fn=lambda s_minus: 1.0):
    """Direct evaluation from (time, event, group) triples, no risk-table code."""
    event_times = sorted({t for t, e, _ in records if e})
    survival = 1.0
    numerator = 0.0
    variance = 0.0
    for t in event_times:
        n = sum(1 for s, _, _ in records if s >= t)
        n1 = sum(1 for s, _, g in records if s >= t and g == 1)
        r = sum(1 for s, e, _ in records if s == t and e)
        r1 = sum(1 for s, e, g in records if s == t and e and g == 1)
        w = weight_fn(survival)
        numerator += w * (r1 - r * n1 / n)
        if n > 1:
            variance += w ** 2 * r * (n1 / n) * (1 - n1 / n) * (n - r) / (n - 1)
        survival *= 1 - r / n
    return numerator / np.sqrt(variance)


def test_fh01_weights_on_four_distinct_events():
    sample = SurvivalSample.from_groups(control=[(1, True), (3, True)], treatment=[(2, True), (4, True)])
    table = build_risk_table(sample)
    weights = compute_weights(FlemingHarrington(0, 1), table, pooled_km(sample))
    np.testing.assert_allclose(weights, [0.0, 0.25, 0.5, 0.75])


@pytest.mark.parametrize('seed', range(20))
def test_weight_identities(seed):
    sample = random_sample(seed)
    unit = weighted_logrank(sample, UnitWeight()).z
    assert abs(weighted_logrank(sample, FlemingHarrington(0, 0)).z - unit) < 1e-12
    assert abs(weighted_logrank(sample, Modest(0)).z - unit) < 1e-12


def test_symmetric_groups_give_zero(symmetric_sample):
    result = weighted_logrank(symmetric_sample, UnitWeight())
    assert result.numerator == 0.0
    assert result.z == 0.0
    assert result.p_one_sided == pytest.approx(0.5)
    assert result.p_two_sided == pytest.approx(1.0)


def test_interleaved_matches_brute_force(interleaved_sample):
    records = [(r.time, r.event, int(r.group)) for r in interleaved_sample.records()]
    result = weighted_logrank(interleaved_sample, UnitWeight())
    assert result.z == pytest.approx(brute_force_z(records), abs=1e-12)
    # treatment events come later: benefit direction
    assert result.z < 0
    assert result.p_one_sided == pytest.approx(stats.norm.cdf(result.z))


@pytest.mark.parametrize('seed', range(20))
def test_small_datasets_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    time = rng.choice([1.0, 2.0, 3.0], size=n)
    event = rng.random(n) < 0.8
    event[0] = True
    group = np.r_[0, 1, rng.integers(0, 2, size=n - 2)]
    sample = SurvivalSample(time, event, group)
    records = list(zip(time.tolist(), event.tolist(), group.tolist()))
    for spec, fn in ((UnitWeight(), lambda s: 1.0),
                     (FlemingHarrington(1, 0), lambda s: s),
                     (FlemingHarrington(0.5, 2), lambda s: s ** 0.5 * (1 - s) ** 2)):
        try:
            z = weighted_logrank(sample, spec).z
        except (ZeroVariance, DegenerateWeight):
            continue
        assert z == pytest.approx(brute_force_z(records, fn), abs=1e-9)


@pytest.mark.parametrize('seed', range(10))
def test_rank_invariance(seed):
    sample = random_sample(seed)
    stretched = sample.with_times(sample.time ** 3 + sample.time)
    for spec in (UnitWeight(), FlemingHarrington(1, 0), FlemingHarrington(0, 1), FlemingHarrington(1, 1)):
        a = weighted_logrank(sample, spec)
        b = weighted_logrank(stretched, spec)
        assert abs(a.z - b.z) < 1e-12
        np.testing.assert_allclose(a.weights, b.weights, atol=1e-12)


def test_scaling_weights_leaves_z_unchanged(interleaved_sample):
    table = build_risk_table(interleaved_sample)
    base = logrank_from_table(table, np.ones(len(table)))
    scaled = logrank_from_table(table, np.full(len(table), 7.0))
    assert scaled.z == pytest.approx(base.z, abs=1e-12)
    assert weighted_logrank(interleaved_sample, FlemingHarrington(0, 0)).z == pytest.approx(scaled.z)


@pytest.mark.parametrize('seed', range(5))
def test_label_swap_negates(seed):
    sample = random_sample(seed)
    swapped = sample.with_groups(1 - sample.group)
    a = weighted_logrank(sample, FlemingHarrington(0, 1))
    b = weighted_logrank(swapped, FlemingHarrington(0, 1))
    assert b.numerator == pytest.approx(-a.numerator, abs=1e-12)
    assert b.z == pytest.approx(-a.z, abs=1e-12)
    assert b.p_two_sided == pytest.approx(a.p_two_sided, abs=1e-12)


@pytest.mark.parametrize('seed', range(5))
def test_modest_weights_nondecreasing_and_flat_after_t_star(seed):
    sample = random_sample(seed)
    table = build_risk_table(sample)
    weights = compute_weights(Modest(6.0), table, pooled_km(sample))
    assert np.all(np.diff(weights) >= -1e-15)
    late = weights[table.times > 6.0]
    if len(late):
        np.testing.assert_allclose(late, late[0])


def test_zero_variance_when_no_overlap():
    # all treatment subjects leave before the first event
    sample = SurvivalSample.from_groups(control=[(2, True), (3, True)], treatment=[(1, False)])
    with pytest.raises(ZeroVariance):
        weighted_logrank(sample, UnitWeight())


def test_covariance_self_and_identity(interleaved_sample):
    variance = weighted_logrank(interleaved_sample, FlemingHarrington(0, 1)).variance
    cov, corr = wlrt_covariance(interleaved_sample, FlemingHarrington(0, 1), FlemingHarrington(0, 1))
    assert cov == pytest.approx(variance)
    assert corr == pytest.approx(1.0)
    assert wlrt_covariance(interleaved_sample, UnitWeight(), FlemingHarrington(0, 0))[1] == pytest.approx(1.0)


def test_covariance_matches_direct_sum(interleaved_sample):
    table = build_risk_table(interleaved_sample)
    v = table.hypergeometric_variance()
    wa = np.ones(len(table))
    wb = 1.0 - pooled_km(interleaved_sample).left_limit(table.times)
    expected = np.sum(wa * wb * v) / np.sqrt(np.sum(wa ** 2 * v) * np.sum(wb ** 2 * v))
    _, corr = wlrt_covariance(interleaved_sample, UnitWeight(), FlemingHarrington(0, 1))
    assert corr == pytest.approx(expected, abs=1e-12)
    assert 0.0 <= corr <= 1.0


@pytest.mark.parametrize('seed', range(5))
def test_covariance_matrix_psd(seed):
    sample = random_sample(seed)
    a, b = FlemingHarrington(1, 0), Modest(12.0)
    cov, _ = wlrt_covariance(sample, a, b)
    var_a = weighted_logrank(sample, a).variance
    var_b = weighted_logrank(sample, b).variance
    assert np.linalg.eigvalsh([[var_a, cov], [cov, var_b]]).min() >= -1e-10


def test_weight_parameter_validation():
    with pytest.raises(InputError):
        FlemingHarrington(-1, 0)
    with pytest.raises(InputError):
        Modest(float('inf'))


def test_weight_spec_parsing():
    assert parse_weight_spec({'type': 'logrank'}) == UnitWeight()
    assert parse_weight_spec({'type': 'fh', 'rho': 0, 'gamma': 1}) == FlemingHarrington(0, 1)
    assert parse_weight_spec({'type': 'modest', 't_star': 12}) == Modest(12)
    assert weight_to_dict(Modest(6)) == {'type': 'modest', 't_star': 6.0}
    with pytest.raises(InputError):
        parse_weight_spec({'type': 'fh', 'rho': 1})
    with pytest.raises(InputError):
        parse_weight_spec({'type': 'gehan'})
    assert is_unit_equivalent(Modest(0)) and not is_unit_equivalent(FlemingHarrington(0, 1))
