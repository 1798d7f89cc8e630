import numpy as np
import pytest

from survival.kaplan_meier import km_estimate, pooled_km
from survival.risk_table import build_risk_table
from survival.sample import Group, SurvivalSample
from utils.error_handler import InputError, NoEvents

from conftest import random_sample


def test_risk_table_rows(risk_table_sample):
    table = build_risk_table(risk_table_sample)
    assert table.rows() == [
        (1.0, 4, 2, 1, 0),
        (2.0, 3, 2, 1, 1),
        (3.0, 2, 1, 1, 0),
    ]


def test_risk_table_all_censored():
    sample = SurvivalSample.from_groups(control=[(1, False)], treatment=[(2, False)])
    with pytest.raises(NoEvents):
        build_risk_table(sample)


def test_risk_table_identical_groups_split_in_half():
    records = [(1, True), (2, True)]
    table = build_risk_table(SurvivalSample.from_groups(records, records))
    np.testing.assert_array_equal(table.r1 * 2, table.r)
    np.testing.assert_array_equal(table.n1 * 2, table.n)


def test_censored_at_event_time_stays_at_risk():
    sample = SurvivalSample.from_groups(control=[(2, False), (3, True)], treatment=[(2, True)])
    table = build_risk_table(sample)
    assert table.rows()[0] == (2.0, 3, 1, 1, 1)


@pytest.mark.parametrize('seed', range(10))
def test_risk_table_totals_and_order_invariance(seed):
    sample = random_sample(seed)
    table = build_risk_table(sample)
    assert table.r.sum() == sample.n_events
    assert table.n[0] == np.sum(sample.time >= table.times[0])

    order = np.random.default_rng(seed).permutation(len(sample))
    shuffled = SurvivalSample(sample.time[order], sample.event[order], sample.group[order])
    assert build_risk_table(shuffled).rows() == table.rows()


def test_hypergeometric_variance_single_at_risk_is_zero():
    sample = SurvivalSample.from_groups(control=[(1, True)], treatment=[(2, True)])
    v = build_risk_table(sample).hypergeometric_variance()
    assert v[0] == pytest.approx(0.25)
    assert v[1] == 0.0


def test_km_half_after_second_of_four_events():
    curve = km_estimate([(1, True), (2, True), (3, True), (4, True)])
    assert curve.value(2.0) == pytest.approx(0.5)
    assert curve.left_limit(2.0) == pytest.approx(0.75)


def test_km_no_events_is_one():
    curve = km_estimate([(1, False), (2, False)])
    assert curve.value(5.0) == 1.0
    assert curve.left_limit(5.0) == 1.0


def test_km_with_censoring_matches_hand_product():
    curve = km_estimate([(1, True), (2, True), (2.5, False), (3, True), (4, False)])
    assert curve.value(1.0) == pytest.approx(4 / 5)
    assert curve.value(2.0) == pytest.approx(4 / 5 * 3 / 4)
    assert curve.value(3.0) == pytest.approx(4 / 5 * 3 / 4 * 1 / 2)
    assert curve.value(2.9) == pytest.approx(0.6)


def test_km_empty_input():
    with pytest.raises(InputError):
        km_estimate([])


@pytest.mark.parametrize('seed', range(5))
def test_km_survival_values_rank_invariant(seed):
    sample = random_sample(seed)
    curve = pooled_km(sample)
    transformed = pooled_km(sample.with_times(sample.time ** 3 + sample.time))
    np.testing.assert_array_equal(curve.survival, transformed.survival)
    assert np.all(np.diff(curve.survival) <= 0)
    assert np.all((curve.survival >= 0) & (curve.survival <= 1))


def test_group_parsing():
    assert Group.parse('Treatment') is Group.TREATMENT
    assert Group.parse('0') is Group.CONTROL
    assert Group.parse(1) is Group.TREATMENT
    with pytest.raises(ValueError):
        Group.parse('placebo')


def test_sample_validation():
    with pytest.raises(InputError):
        SurvivalSample([1.0, -1.0], [True, True], [0, 1])
    with pytest.raises(InputError):
        SurvivalSample([1.0, np.nan], [True, True], [0, 1])
    with pytest.raises(InputError):
        SurvivalSample([1.0, 2.0], [True, True], [0, 2])
    with pytest.raises(InputError):
        SurvivalSample.from_groups(control=[(1, True)], treatment=[]).require_two_groups()


def test_sample_is_read_only(interleaved_sample):
    with pytest.raises(ValueError):
        interleaved_sample.time[0] = 10.0
    assert interleaved_sample.group_sizes() == (3, 3)
    assert interleaved_sample.records()[1].group is Group.CONTROL
