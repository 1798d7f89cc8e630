import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from survival.sample import Group, SurvivalSample
from utils.error_handler import InfeasibleDesign, InputError
from utils.logging_setup import setup_logging
from utils.random_streams import make_stream
from .scenarios import ScenarioSpec

logger = setup_logging('trial_simulator')

DAYS_PER_MONTH = 30.4375
RECRUITMENT_DAYS = {'slow': 700.0, 'medium': 400.0, 'fast': 100.0}


def recruitment_months(speed: str, days_per_month: float = DAYS_PER_MONTH) -> float:
    """Recruitment window in months for a named speed."""
    try:
        return RECRUITMENT_DAYS[speed] / days_per_month
    except KeyError:
        raise InputError(f"unknown recruitment speed {speed!r}", field='recruitment') from None


@dataclass(frozen=True)
class EventCount:
    d: int

    def events(self, n_total: int) -> int:
        return int(self.d)


@dataclass(frozen=True)
class EventFraction:
    f: float

    def events(self, n_total: int) -> int:
        # tolerance keeps 0.75 * 8 from rounding up to 7
        return int(math.ceil(self.f * n_total - 1e-9))


StopRule = Union[EventCount, EventFraction]


@dataclass(frozen=True)
class TrialDesign:
    """1:1 randomised trial with uniform accrual and an event-driven analysis."""
    n_total: int
    recruitment_window: float
    stop_rule: StopRule

    def __post_init__(self):
        if self.n_total < 2 or self.n_total % 2:
            raise InputError(f"n_total must be an even number >= 2, got {self.n_total}", field='n_total')
        if not self.recruitment_window > 0:
            raise InputError("recruitment_window must be positive", field='recruitment_window')
        if isinstance(self.stop_rule, EventFraction) and not 0 < self.stop_rule.f <= 1:
            raise InputError(f"event fraction must lie in (0, 1], got {self.stop_rule.f}",
                             field='stop_rule.f')
        if isinstance(self.stop_rule, EventCount) and self.stop_rule.d < 1:
            raise InputError(f"event count must be >= 1, got {self.stop_rule.d}", field='stop_rule.d')

    @property
    def target_events(self) -> int:
        return self.stop_rule.events(self.n_total)

    def with_events(self, d: int) -> 'TrialDesign':
        return TrialDesign(self.n_total, self.recruitment_window, EventCount(d))


@dataclass(frozen=True)
class TrialDataset:
    """Simulated trial at its analysis cutoff (enrolled subjects only)."""
    sample: SurvivalSample
    entry: np.ndarray
    admin_censored: np.ndarray
    cutoff: float
    n_not_enrolled: int = 0
    subgroup_member: np.ndarray = None


def simulate_trial(scenario: ScenarioSpec, design: TrialDesign, seed: int, *keys: int) -> TrialDataset:
    """One trial: uniform entry, latent survival times, cutoff at the d-th calendar event.

    `keys` extend the seed (e.g. cell and replicate index) so that every
    replicate owns an independent stream.
    """
    d = design.target_events
    if d > design.n_total:
        raise InfeasibleDesign(f"{d} events requested from {design.n_total} subjects")

    stream = make_stream(seed, *keys)
    per_arm = design.n_total // 2
    group = np.repeat([int(Group.CONTROL), int(Group.TREATMENT)], per_arm)
    entry = stream.uniform(0.0, design.recruitment_window, size=design.n_total)

    latent_c, _ = scenario.draw(Group.CONTROL, per_arm, stream)
    latent_t, member_t = scenario.draw(Group.TREATMENT, per_arm, stream)
    latent = np.concatenate([latent_c, latent_t])
    member = np.concatenate([np.zeros(per_arm, dtype=bool),
                             np.zeros(per_arm, dtype=bool) if member_t is None else member_t])

    calendar = entry + latent
    cutoff = float(np.partition(calendar, d - 1)[d - 1])
    event = calendar <= cutoff
    time = np.where(event, latent, cutoff - entry)

    enrolled = entry <= cutoff
    n_not_enrolled = int((~enrolled).sum())
    if n_not_enrolled:
        logger.debug(f"{n_not_enrolled} subjects entered after the cutoff and are excluded")

    return TrialDataset(
        sample=SurvivalSample(time[enrolled], event[enrolled], group[enrolled]),
        entry=entry[enrolled],
        admin_censored=~event[enrolled],
        cutoff=cutoff,
        n_not_enrolled=n_not_enrolled,
        subgroup_member=member[enrolled],
    )


def parse_design(data: dict, days_per_month: float = DAYS_PER_MONTH) -> TrialDesign:
    """Design from a JSON-style dict.

    Recruitment is given as `recruitment` (slow/medium/fast), `recruitment_days`
    or `recruitment_window` (months).
    """
    try:
        n_total = int(data['n_total'])
        if 'recruitment_window' in data:
            window = float(data['recruitment_window'])
        elif 'recruitment_days' in data:
            window = float(data['recruitment_days']) / days_per_month
        else:
            window = recruitment_months(data.get('recruitment', 'medium'), days_per_month)
        rule = data['stop_rule']
        kind = rule.get('type')
        if kind == 'event_count':
            stop_rule = EventCount(int(rule['d']))
        elif kind == 'event_fraction':
            stop_rule = EventFraction(float(rule['f']))
        else:
            raise InputError(f"unknown stop rule {kind!r}", field='design.stop_rule.type')
    except KeyError as e:
        raise InputError(f"design is missing {e.args[0]!r}", field=f"design.{e.args[0]}") from e
    return TrialDesign(n_total, window, stop_rule)


if __name__ == "__main__":
    # Test run
    from .scenarios import NullScenario
    trial = simulate_trial(NullScenario(12.0), TrialDesign(8, 13.14, EventFraction(0.75)), seed=1)
    print(f"Events: {trial.sample.n_events}, cutoff: {trial.cutoff:.2f} months")
