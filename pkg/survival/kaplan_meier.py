from dataclasses import dataclass

import numpy as np

from utils.error_handler import InputError
from .risk_table import build_risk_table
from .sample import SurvivalSample


@dataclass(frozen=True)
class KmCurve:
    """Kaplan-Meier step function; `survival[j]` is the value from `times[j]` on."""
    times: np.ndarray
    survival: np.ndarray

    def value(self, t) -> np.ndarray:
        """Right-continuous S(t)."""
        idx = np.searchsorted(self.times, t, side='right')
        return self._lookup(idx)

    def left_limit(self, t) -> np.ndarray:
        """S(t-), the product over event times strictly before t."""
        idx = np.searchsorted(self.times, t, side='left')
        return self._lookup(idx)

    def left_limits_at_drops(self) -> np.ndarray:
        return np.concatenate(([1.0], self.survival[:-1]))

    def _lookup(self, idx):
        padded = np.concatenate(([1.0], self.survival))
        out = padded[idx]
        return float(out) if np.ndim(out) == 0 else out


def km_estimate(time, event=None) -> KmCurve:
    """Pooled Kaplan-Meier estimate.

    Accepts either a list of (time, event) pairs or two arrays.
    """
    if event is None:
        pairs = list(time)
        if not pairs:
            raise InputError("Kaplan-Meier estimate needs at least one record")
        time, event = zip(*pairs)
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    if len(time) == 0:
        raise InputError("Kaplan-Meier estimate needs at least one record")
    if not event.any():
        return KmCurve(times=np.empty(0), survival=np.empty(0))

    # group labels play no role in the pooled curve
    table = build_risk_table(SurvivalSample(time, event, np.zeros(len(time), dtype=int)))
    survival = np.cumprod(1.0 - table.r / table.n.astype(float))
    return KmCurve(times=table.times, survival=survival)


def pooled_km(sample: SurvivalSample) -> KmCurve:
    return km_estimate(sample.time, sample.event)


if __name__ == "__main__":
    # Test run
    curve = km_estimate([(1, True), (2, True), (2.5, False), (3, True)])
    print(f"KM: {list(zip(curve.times.tolist(), curve.survival.tolist()))}")
    print(f"S(3-) = {curve.left_limit(3.0)}")
