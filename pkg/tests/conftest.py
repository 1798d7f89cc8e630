import os
import sys

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np
import pytest

from survival.sample import SurvivalSample


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo checks, run with NPH_RUN_SLOW=1")


def pytest_collection_modifyitems(config, items):
    if os.getenv('NPH_RUN_SLOW') == '1':
        return
    skip_slow = pytest.mark.skip(reason="set NPH_RUN_SLOW=1 to run")
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


def random_sample(seed: int, n: int = 30, event_rate: float = 0.7) -> SurvivalSample:
    """Two balanced groups, times rounded to create ties."""
    rng = np.random.default_rng(seed)
    time = np.round(rng.exponential(10.0, size=n), 1) + 0.1
    event = rng.random(n) < event_rate
    event[:2] = True
    group = np.arange(n) % 2
    return SurvivalSample(time, event, group)


@pytest.fixture
def symmetric_sample():
    records = [(1.0, True), (2.0, True), (3.0, False), (4.0, True)]
    return SurvivalSample.from_groups(control=records, treatment=records)


@pytest.fixture
def interleaved_sample():
    """Control events at 1, 3, 5 and treatment events at 2, 4, 6."""
    return SurvivalSample.from_groups(
        control=[(1, True), (3, True), (5, True)],
        treatment=[(2, True), (4, True), (6, True)],
    )


@pytest.fixture
def risk_table_sample():
    return SurvivalSample.from_groups(
        control=[(1, True), (3, True)],
        treatment=[(2, True), (4, False)],
    )
