import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from survival.kaplan_meier import KmCurve
from survival.risk_table import RiskTable
from utils.error_handler import DegenerateWeight, InputError


def _check_param(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise InputError(f"{name} must be finite and >= 0, got {value}", field=name)
    return value


@dataclass(frozen=True)
class UnitWeight:
    @property
    def label(self) -> str:
        return "LR"

    def compute(self, table: RiskTable, km: KmCurve) -> np.ndarray:
        return np.ones(len(table))


@dataclass(frozen=True)
class FlemingHarrington:
    """G(rho, gamma): S(t-)^rho * (1 - S(t-))^gamma from the pooled KM curve."""
    rho: float
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, 'rho', _check_param('rho', self.rho))
        object.__setattr__(self, 'gamma', _check_param('gamma', self.gamma))

    @property
    def label(self) -> str:
        return f"FH({self.rho:g},{self.gamma:g})"

    def compute(self, table: RiskTable, km: KmCurve) -> np.ndarray:
        s_minus = km.left_limit(table.times)
        # 0 ** 0 == 1 keeps FH(0,0) identical to unit weights
        weights = np.power(s_minus, self.rho) * np.power(1.0 - s_minus, self.gamma)
        if not np.any(weights > 0):
            raise DegenerateWeight(f"{self.label} weight is zero at every event time")
        return weights


@dataclass(frozen=True)
class Modest:
    """Modestly weighted test: 1 / max(S(t-), S(t*-)); constant after t*."""
    t_star: float

    def __post_init__(self):
        object.__setattr__(self, 't_star', _check_param('t_star', self.t_star))

    @property
    def label(self) -> str:
        return f"Modest({self.t_star:g})"

    def compute(self, table: RiskTable, km: KmCurve) -> np.ndarray:
        s_minus = km.left_limit(table.times)
        s_star = km.left_limit(self.t_star)
        floor = np.maximum(s_minus, s_star)
        if np.any(floor <= 0):
            raise DegenerateWeight(f"{self.label} weight undefined: S(t*-) is zero")
        return 1.0 / floor


WeightSpec = Union[UnitWeight, FlemingHarrington, Modest]


def weight_key(spec: WeightSpec) -> tuple:
    """Sort key that orders equal specs together."""
    if isinstance(spec, UnitWeight):
        return (0, 0.0, 0.0)
    if isinstance(spec, FlemingHarrington):
        return (1, spec.rho, spec.gamma)
    return (2, spec.t_star, 0.0)


def is_unit_equivalent(spec: WeightSpec) -> bool:
    """True for specs whose weights are 1 at every event time on any data."""
    return weight_key(spec) in ((0, 0.0, 0.0), (1, 0.0, 0.0), (2, 0.0, 0.0))


def compute_weights(spec: WeightSpec, table: RiskTable, pooled_km: KmCurve) -> np.ndarray:
    """One weight per event time of `table`."""
    return spec.compute(table, pooled_km)


def parse_weight_spec(data: dict) -> WeightSpec:
    """Build a weight spec from a JSON-style dict."""
    kind = str(data.get('type', '')).lower()
    try:
        if kind in ('logrank', 'unit', 'lr'):
            return UnitWeight()
        if kind in ('fh', 'fleming_harrington', 'fleming-harrington'):
            return FlemingHarrington(data['rho'], data['gamma'])
        if kind == 'modest':
            return Modest(data['t_star'])
    except KeyError as e:
        raise InputError(f"weight spec {kind!r} is missing {e.args[0]!r}", field=e.args[0]) from e
    raise InputError(f"unknown weight type {data.get('type')!r}", field='type')


def weight_to_dict(spec: WeightSpec) -> dict:
    if isinstance(spec, UnitWeight):
        return {'type': 'logrank'}
    if isinstance(spec, FlemingHarrington):
        return {'type': 'fh', 'rho': spec.rho, 'gamma': spec.gamma}
    return {'type': 'modest', 't_star': spec.t_star}
