import math
from dataclasses import asdict, dataclass, replace
from typing import Union

import numpy as np

from survival.sample import Group
from utils.error_handler import InputError

LN2 = math.log(2.0)


def rate(median: float) -> float:
    """Exponential hazard with the given median."""
    return LN2 / median


def _exponential(median: float, size: int, stream: np.random.Generator) -> np.ndarray:
    return stream.exponential(median / LN2, size=size)


def _check_median(name: str, value: float) -> None:
    if not (math.isfinite(value) and value > 0):
        raise InputError(f"{name} must be a positive number of months, got {value}", field=name)


@dataclass(frozen=True)
class PHScenario:
    median_control: float = 12.0
    median_treatment: float = 18.0

    kind = 'ph'

    def __post_init__(self):
        _check_median('median_control', self.median_control)
        _check_median('median_treatment', self.median_treatment)

    def draw(self, arm: Group, size: int, stream: np.random.Generator) -> tuple:
        median = self.median_treatment if arm == Group.TREATMENT else self.median_control
        return _exponential(median, size, stream), None

    def with_hr(self, hr: float) -> 'PHScenario':
        return replace(self, median_treatment=self.median_control / hr)


@dataclass(frozen=True)
class DelayedScenario:
    """Treatment hazard equals control hazard until `delay`, then follows `median_post`."""
    median_control: float = 12.0
    delay: float = 4.0
    median_post: float = 18.0

    kind = 'delayed'

    def __post_init__(self):
        _check_median('median_control', self.median_control)
        _check_median('median_post', self.median_post)
        if not (math.isfinite(self.delay) and self.delay >= 0):
            raise InputError(f"delay must be >= 0, got {self.delay}", field='delay')

    def draw(self, arm: Group, size: int, stream: np.random.Generator) -> tuple:
        if arm != Group.TREATMENT:
            return _exponential(self.median_control, size, stream), None
        # invert the piecewise-constant cumulative hazard at an Exp(1) draw
        cumulative = stream.exponential(1.0, size=size)
        lam_c, lam_post = rate(self.median_control), rate(self.median_post)
        at_delay = lam_c * self.delay
        times = np.where(cumulative < at_delay,
                         cumulative / lam_c,
                         self.delay + (cumulative - at_delay) / lam_post)
        return times, None

    def with_hr(self, hr: float) -> 'DelayedScenario':
        return replace(self, median_post=self.median_control / hr)


@dataclass(frozen=True)
class SubgroupScenario:
    """A share `prevalence` of the treatment arm responds with `median_subgroup`."""
    median_control: float = 12.0
    prevalence: float = 0.2
    median_subgroup: float = 120.0
    median_complement: float = 12.0

    kind = 'subgroup'

    def __post_init__(self):
        _check_median('median_control', self.median_control)
        _check_median('median_subgroup', self.median_subgroup)
        _check_median('median_complement', self.median_complement)
        if not 0 <= self.prevalence <= 1:
            raise InputError(f"prevalence must lie in [0, 1], got {self.prevalence}", field='prevalence')

    def draw(self, arm: Group, size: int, stream: np.random.Generator) -> tuple:
        if arm != Group.TREATMENT:
            return _exponential(self.median_control, size, stream), None
        member = stream.random(size) < self.prevalence
        times = np.where(member,
                         _exponential(self.median_subgroup, size, stream),
                         _exponential(self.median_complement, size, stream))
        return times, member

    def with_hr(self, hr: float) -> 'SubgroupScenario':
        return replace(self, median_complement=self.median_control / hr)


@dataclass(frozen=True)
class ProgressionScenario:
    """Competing progression event; after progression survival follows `median_post_progression`."""
    median_control: float = 12.0
    median_treatment: float = 18.0
    median_progression: float = 36.0
    median_post_progression: float = 9.0

    kind = 'progression'

    def __post_init__(self):
        for name in ('median_control', 'median_treatment', 'median_progression',
                     'median_post_progression'):
            _check_median(name, getattr(self, name))

    def draw(self, arm: Group, size: int, stream: np.random.Generator) -> tuple:
        median = self.median_treatment if arm == Group.TREATMENT else self.median_control
        progression = _exponential(self.median_progression, size, stream)
        pre = _exponential(median, size, stream)
        post = _exponential(self.median_post_progression, size, stream)
        progressed = progression < pre
        return np.where(progressed, progression + post, pre), None

    def with_hr(self, hr: float) -> 'ProgressionScenario':
        return replace(self, median_treatment=self.median_control / hr)


@dataclass(frozen=True)
class NullScenario:
    median: float = 12.0

    kind = 'null'

    def __post_init__(self):
        _check_median('median', self.median)

    def draw(self, arm: Group, size: int, stream: np.random.Generator) -> tuple:
        return _exponential(self.median, size, stream), None

    def with_hr(self, hr: float) -> 'NullScenario':
        if not math.isclose(hr, 1.0):
            raise InputError("the null scenario only admits HR = 1", field='hr')
        return self


ScenarioSpec = Union[PHScenario, DelayedScenario, SubgroupScenario, ProgressionScenario, NullScenario]

SCENARIO_TYPES = {cls.kind: cls for cls in
                  (PHScenario, DelayedScenario, SubgroupScenario, ProgressionScenario, NullScenario)}

REFERENCE_SCENARIOS = {
    'ph': PHScenario(12.0, 18.0),
    'delayed_short': DelayedScenario(12.0, delay=2.0, median_post=18.0),
    'delayed_long': DelayedScenario(12.0, delay=4.0, median_post=18.0),
    'progression_long': ProgressionScenario(12.0, 18.0, 36.0, 9.0),
    'progression_short': ProgressionScenario(12.0, 18.0, 36.0, 3.0),
    'subgroup_low': SubgroupScenario(12.0, prevalence=0.2, median_subgroup=120.0, median_complement=12.0),
    'subgroup_high': SubgroupScenario(12.0, prevalence=0.5, median_subgroup=120.0, median_complement=12.0),
    'null': NullScenario(12.0),
}


def draw_latent_time(scenario: ScenarioSpec, arm: Group, stream: np.random.Generator) -> tuple:
    """One latent survival time (months) and, for subgroup scenarios, the membership flag."""
    times, member = scenario.draw(Group.parse(arm), 1, stream)
    return float(times[0]), (None if member is None else bool(member[0]))


def parse_scenario(data: dict) -> ScenarioSpec:
    """Scenario from a JSON-style dict: a `type` plus the scenario's fields,
    or the name of a reference scenario."""
    if isinstance(data, str):
        data = {'type': data}
    kind = str(data.get('type', '')).lower()
    fields = {k: v for k, v in data.items() if k != 'type'}
    if kind in REFERENCE_SCENARIOS and not fields:
        return REFERENCE_SCENARIOS[kind]
    if kind not in SCENARIO_TYPES:
        raise InputError(f"unknown scenario type {data.get('type')!r}", field='scenario.type')
    try:
        return SCENARIO_TYPES[kind](**{k: float(v) for k, v in fields.items()})
    except TypeError as e:
        raise InputError(f"bad fields for scenario {kind!r}: {e}", field='scenario') from e


def scenario_to_dict(scenario: ScenarioSpec) -> dict:
    return {'type': scenario.kind, **asdict(scenario)}
