from dataclasses import dataclass

import numpy as np

from utils.error_handler import NoEvents
from .sample import SurvivalSample


@dataclass(frozen=True)
class RiskTable:
    """Counts at each distinct event time, ordered by time.

    n: at risk (total), n1: at risk in treatment, r: events (total),
    r1: events in treatment.
    """
    times: np.ndarray
    n: np.ndarray
    n1: np.ndarray
    r: np.ndarray
    r1: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    def rows(self) -> list:
        return [(float(t), int(n), int(n1), int(r), int(r1))
                for t, n, n1, r, r1 in zip(self.times, self.n, self.n1, self.r, self.r1)]

    def hypergeometric_variance(self) -> np.ndarray:
        """Per-time null variance V_j of the treatment event count.

        A risk set of one contributes nothing (the (n - r)/(n - 1) factor is 0/0).
        """
        n = self.n.astype(float)
        share = self.n1 / n
        out = np.zeros(len(n))
        big = n > 1
        out[big] = (self.r[big] * share[big] * (1.0 - share[big])
                    * (n[big] - self.r[big]) / (n[big] - 1.0))
        return out

    def observed_minus_expected(self) -> np.ndarray:
        return self.r1 - self.r * self.n1 / self.n.astype(float)


def _at_risk(sorted_times: np.ndarray, at: np.ndarray) -> np.ndarray:
    # subjects with time >= t; censored at t still count for events at t
    return len(sorted_times) - np.searchsorted(sorted_times, at, side='left')


def build_risk_table(sample: SurvivalSample) -> RiskTable:
    """One row per distinct event time of the pooled sample."""
    if sample.n_events == 0:
        raise NoEvents("every record is censored")

    event_times = sample.time[sample.event]
    times, r = np.unique(event_times, return_counts=True)

    treated = sample.group == 1
    treated_events = sample.time[sample.event & treated]
    r1 = np.zeros(len(times), dtype=int)
    if len(treated_events):
        t1, c1 = np.unique(treated_events, return_counts=True)
        r1[np.searchsorted(times, t1)] = c1

    n = _at_risk(np.sort(sample.time), times)
    n1 = _at_risk(np.sort(sample.time[treated]), times)
    return RiskTable(times=times, n=n, n1=n1, r=r, r1=r1)
