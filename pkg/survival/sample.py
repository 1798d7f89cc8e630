from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, NamedTuple

import numpy as np

from utils.error_handler import InputError


class Group(IntEnum):
    CONTROL = 0
    TREATMENT = 1

    @classmethod
    def parse(cls, value) -> 'Group':
        """Accept 0/1, 'control'/'treatment' (any case) or a Group."""
        if isinstance(value, Group):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            if key in ('control', '0'):
                return cls.CONTROL
            if key in ('treatment', '1'):
                return cls.TREATMENT
            raise ValueError(f"unknown group label {value!r}")
        if value in (0, 1):
            return cls(int(value))
        raise ValueError(f"unknown group label {value!r}")


class SubjectRecord(NamedTuple):
    time: float
    event: bool
    group: Group


@dataclass(frozen=True)
class SurvivalSample:
    """Right-censored two-group time-to-event data.

    Stored column-wise: `time` in months, `event` True for an observed event,
    `group` 0 (control) or 1 (treatment). Arrays are read-only.
    """
    time: np.ndarray
    event: np.ndarray
    group: np.ndarray

    def __post_init__(self):
        time = np.asarray(self.time, dtype=float).copy()
        event = np.asarray(self.event, dtype=bool).copy()
        group = np.asarray(self.group).astype(np.int8)

        if time.ndim != 1 or not (len(time) == len(event) == len(group)):
            raise InputError("time, event and group must be 1-d arrays of equal length")
        if len(time) == 0:
            raise InputError("sample is empty")
        if not np.all(np.isfinite(time)):
            raise InputError("time must be finite", field='time')
        if np.any(time < 0):
            raise InputError("time must be >= 0", field='time')
        if np.any((group != 0) & (group != 1)):
            raise InputError("group must be 0 (control) or 1 (treatment)", field='group')

        for arr in (time, event, group):
            arr.setflags(write=False)
        object.__setattr__(self, 'time', time)
        object.__setattr__(self, 'event', event)
        object.__setattr__(self, 'group', group)

    @classmethod
    def from_records(cls, records: Iterable) -> 'SurvivalSample':
        records = [SubjectRecord(float(t), bool(e), Group.parse(g)) for t, e, g in records]
        if not records:
            raise InputError("sample is empty")
        time, event, group = zip(*records)
        return cls(np.array(time), np.array(event), np.array([int(g) for g in group]))

    @classmethod
    def from_groups(cls, control: Iterable, treatment: Iterable) -> 'SurvivalSample':
        """Build from two lists of (time, event) pairs."""
        records = [(t, e, Group.CONTROL) for t, e in control]
        records += [(t, e, Group.TREATMENT) for t, e in treatment]
        return cls.from_records(records)

    def __len__(self) -> int:
        return len(self.time)

    def records(self) -> list:
        return [SubjectRecord(float(t), bool(e), Group(int(g)))
                for t, e, g in zip(self.time, self.event, self.group)]

    @property
    def n_events(self) -> int:
        return int(self.event.sum())

    def group_sizes(self) -> tuple:
        n_treatment = int(self.group.sum())
        return len(self) - n_treatment, n_treatment

    def has_both_groups(self) -> bool:
        n_control, n_treatment = self.group_sizes()
        return n_control > 0 and n_treatment > 0

    def with_groups(self, group: np.ndarray) -> 'SurvivalSample':
        """Same (time, event) pairs under new group labels."""
        return SurvivalSample(self.time, self.event, group)

    def with_times(self, time: np.ndarray) -> 'SurvivalSample':
        return SurvivalSample(time, self.event, self.group)

    def require_two_groups(self) -> None:
        if not self.has_both_groups():
            raise InputError("both control and treatment groups must be present", field='group')
