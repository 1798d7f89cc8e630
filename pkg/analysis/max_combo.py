from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy import stats

from survival.kaplan_meier import pooled_km
from survival.risk_table import build_risk_table
from survival.sample import SurvivalSample
from utils.error_handler import InputError
from .mvn_tail import mvn_tail_with_error
from .weighted_logrank import covariance_from_table, logrank_from_table
from .weights import FlemingHarrington, WeightSpec, compute_weights, is_unit_equivalent, weight_key

DEFAULT_MVN_DRAWS = 200000


@dataclass(frozen=True)
class MaxComboSpec:
    components: Tuple[WeightSpec, ...]
    mvn_draws: int = DEFAULT_MVN_DRAWS
    mvn_seed: int = 0

    def __post_init__(self):
        components = tuple(self.components)
        object.__setattr__(self, 'components', components)
        if len(components) < 2:
            raise InputError("max-combo needs at least two weight functions", field='components')
        if len(set(components)) != len(components):
            raise InputError("max-combo components must be distinct", field='components')
        if self.mvn_draws < 1:
            raise InputError("mvn_draws must be positive", field='mvn_draws')

    @property
    def label(self) -> str:
        return "MaxCombo[" + ",".join(c.label for c in self.components) + "]"

    def includes_logrank(self) -> bool:
        """True if any component reduces to the plain log-rank."""
        return any(is_unit_equivalent(c) for c in self.components)


@dataclass(frozen=True)
class MaxComboResult:
    z_oriented: np.ndarray
    z_max: float
    corr: np.ndarray
    p_adjusted: float
    argmax: int
    p_components: np.ndarray = field(default=None)
    # MVN tail estimate before clipping to the Bonferroni bounds
    p_raw: float = float('nan')
    p_raw_se: float = 0.0


LIN_WEIGHTS = (
    FlemingHarrington(0, 0),
    FlemingHarrington(1, 0),
    FlemingHarrington(0, 1),
    FlemingHarrington(1, 1),
)


def lin_combo(mvn_draws: int = DEFAULT_MVN_DRAWS, mvn_seed: int = 0) -> MaxComboSpec:
    """Four-weight combination FH(0,0), FH(1,0), FH(0,1), FH(1,1)."""
    return MaxComboSpec(LIN_WEIGHTS, mvn_draws=mvn_draws, mvn_seed=mvn_seed)


def two_step_combo(mvn_draws: int = DEFAULT_MVN_DRAWS, mvn_seed: int = 0) -> MaxComboSpec:
    """Second-stage combination: the log-rank is already the PH branch, so FH(0,0) is left out."""
    return MaxComboSpec(LIN_WEIGHTS[1:], mvn_draws=mvn_draws, mvn_seed=mvn_seed)


def without_logrank(spec: MaxComboSpec) -> MaxComboSpec:
    kept = tuple(c for c in spec.components if not is_unit_equivalent(c))
    return MaxComboSpec(kept, mvn_draws=spec.mvn_draws, mvn_seed=spec.mvn_seed)


def maxcombo_test(sample: SurvivalSample, spec: MaxComboSpec) -> MaxComboResult:
    """Maximum of the oriented component statistics with a joint-normal adjusted p-value."""
    sample.require_two_groups()
    table = build_risk_table(sample)
    km = pooled_km(sample)
    weights = [compute_weights(c, table, km) for c in spec.components]

    z = np.array([logrank_from_table(table, w).z for w in weights])
    z_oriented = -z
    k = len(weights)
    corr = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            corr[i, j] = corr[j, i] = covariance_from_table(table, weights[i], weights[j])[1]

    argmax = int(np.argmax(z_oriented))
    z_max = float(z_oriented[argmax])

    # integrate in a canonical component order so the estimate ignores input order
    order = sorted(range(k), key=lambda i: weight_key(spec.components[i]))
    raw, raw_se = mvn_tail_with_error(z_max, corr[np.ix_(order, order)], draws=spec.mvn_draws,
                                      seed=spec.mvn_seed)

    # the exact value lies between the largest marginal tail and the Bonferroni bound
    p_min = float(stats.norm.sf(z_max))
    p_adjusted = float(np.clip(raw, p_min, min(1.0, k * p_min)))
    return MaxComboResult(z_oriented=z_oriented, z_max=z_max, corr=corr,
                          p_adjusted=p_adjusted, argmax=argmax,
                          p_components=stats.norm.sf(z_oriented), p_raw=raw, p_raw_se=raw_se)
