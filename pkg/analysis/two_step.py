import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np
from joblib import Parallel, delayed

from survival.sample import SurvivalSample
from utils.error_handler import ConstantTransform, InputError, StatisticalError
from utils.logging_setup import setup_logging
from utils.random_streams import chunk_indices, make_stream
from .max_combo import (DEFAULT_MVN_DRAWS, MaxComboSpec, lin_combo, maxcombo_test, two_step_combo,
                        without_logrank)
from .ph_pretest import TIME_TRANSFORMS, gt_test
from .weighted_logrank import weighted_logrank
from .weights import UnitWeight, WeightSpec, parse_weight_spec, weight_to_dict

logger = setup_logging('two_step')

TestSpec = Union[WeightSpec, MaxComboSpec]


class Branch(str, Enum):
    PH = 'PH'
    NPH = 'NPH'


class TieRule(str, Enum):
    COUNT_LE = 'le'            # count p_i <= p0
    COUNT_LT = 'lt'            # count p_i < p0
    ADD_ONE = 'add_one'        # (1 + #{p_i <= p0}) / (m + 1)


class Mode(str, Enum):
    NAIVE = 'naive'
    PERMUTATION = 'permutation'


def one_sided_p(sample: SurvivalSample, test: TestSpec) -> float:
    """One-sided p-value in the benefit direction for a conventional test."""
    if isinstance(test, MaxComboSpec):
        return maxcombo_test(sample, test).p_adjusted
    return weighted_logrank(sample, test).p_one_sided


@dataclass(frozen=True)
class TwoStepConfig:
    alternative: TestSpec
    alpha_pre: float = 0.2
    alpha: float = 0.025
    m: int = 2500
    seed: int = 0
    tie_rule: TieRule = TieRule.COUNT_LE
    time_transform: str = 'km'

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise InputError(f"alpha must lie in (0, 1), got {self.alpha}", field='alpha')
        if not 0 <= self.alpha_pre <= 1:
            raise InputError(f"alpha_pre must lie in [0, 1], got {self.alpha_pre}", field='alpha_pre')
        if self.m < 1:
            raise InputError(f"m must be >= 1, got {self.m}", field='m')
        if self.time_transform not in TIME_TRANSFORMS:
            raise InputError(f"unknown time transform {self.time_transform!r}", field='time_transform')
        if isinstance(self.alternative, MaxComboSpec) and self.alternative.includes_logrank():
            raise InputError("two-step max-combo must not include the log-rank weight",
                             field='alternative')
        object.__setattr__(self, 'tie_rule', TieRule(self.tie_rule))


@dataclass(frozen=True)
class TwoStepResult:
    p_pre: float
    branch: Branch
    p0: float
    p_final: float
    reject: bool
    exceed_count: Optional[int] = None
    m: Optional[int] = None
    failed_permutations: int = 0
    pretest_status: str = 'ok'

    def to_dict(self) -> dict:
        return {
            'p_pre': None if math.isnan(self.p_pre) else self.p_pre,
            'branch': self.branch.value,
            'p0': self.p0,
            'p_final': self.p_final,
            'reject': self.reject,
            'exceed_count': self.exceed_count,
            'm': self.m,
            'failed_permutations': self.failed_permutations,
            'pretest_status': self.pretest_status,
        }


def choose_branch(p_pre: float, alpha_pre: float) -> Branch:
    """NPH iff p_pre <= alpha_pre; the bounds 0 and 1 force the branch."""
    if alpha_pre <= 0:
        return Branch.PH
    if alpha_pre >= 1:
        return Branch.NPH
    return Branch.NPH if p_pre <= alpha_pre else Branch.PH


def cached(cache: Optional[dict], key, compute):
    """Memoise `compute()` in `cache`, statistical failures included."""
    if cache is None:
        return compute()
    if key not in cache:
        try:
            cache[key] = (compute(), None)
        except StatisticalError as e:
            cache[key] = (None, e)
    value, error = cache[key]
    if error is not None:
        raise error
    return value


def run_pretest(sample: SurvivalSample, config: TwoStepConfig, cache: dict = None) -> tuple:
    """(p_pre, status) of the PH pre-test.

    A single distinct event time gives no trend to test and is read as "PH
    not rejected". When alpha_pre forces the branch, any pre-test failure is
    only reported.
    """
    try:
        p_pre = cached(cache, ('gt', config.time_transform),
                       lambda: gt_test(sample, config.time_transform).p_pre)
        return p_pre, 'ok'
    except ConstantTransform:
        return 1.0, 'constant_transform'
    except StatisticalError as e:
        if config.alpha_pre <= 0 or config.alpha_pre >= 1:
            return float('nan'), f'failed: {type(e).__name__}'
        raise


def naive_two_step(sample: SurvivalSample, config: TwoStepConfig, cache: dict = None) -> TwoStepResult:
    """Pre-test for PH, then the log-rank or the alternative test.

    `cache` lets several configurations share the pre-test and second-step
    p-values computed on the same data set.
    """
    p_pre, status = run_pretest(sample, config, cache)
    branch = choose_branch(p_pre, config.alpha_pre)
    test = UnitWeight() if branch is Branch.PH else config.alternative
    p = cached(cache, ('test', test), lambda: one_sided_p(sample, test))
    return TwoStepResult(p_pre=p_pre, branch=branch, p0=p, p_final=p,
                         reject=p <= config.alpha, pretest_status=status)


def permute_labels(sample: SurvivalSample, stream: np.random.Generator) -> SurvivalSample:
    """Random reassignment of group labels; group sizes are preserved."""
    return sample.with_groups(stream.permutation(sample.group))


def _exceeds(p_i: float, p0: float, tie_rule: TieRule) -> bool:
    if tie_rule is TieRule.COUNT_LT:
        return p_i < p0
    return p_i <= p0


def _permutation_chunk(sample: SurvivalSample, config: TwoStepConfig, p0: float, indices) -> tuple:
    exceed = 0
    failed = 0
    for i in indices:
        permuted = permute_labels(sample, make_stream(config.seed, i))
        try:
            p_i = naive_two_step(permuted, config).p_final
        except StatisticalError as e:
            logger.debug(f"Permutation {i} failed: {e}")
            p_i = 1.0
            failed += 1
        if _exceeds(p_i, p0, config.tie_rule):
            exceed += 1
    return exceed, failed


def permutation_two_step(sample: SurvivalSample, config: TwoStepConfig, n_jobs: int = 1) -> TwoStepResult:
    """Naive two-step p-value calibrated against its label-permutation distribution.

    Every permuted data set goes through the whole procedure, pre-test
    included. Permutation i always uses the stream (seed, i), so the result
    does not depend on n_jobs.
    """
    sample.require_two_groups()
    observed = naive_two_step(sample, config)
    p0 = observed.p_final

    chunks = chunk_indices(config.m, n_jobs * 4 if n_jobs > 1 else 1)
    if n_jobs > 1:
        tallies = Parallel(n_jobs=n_jobs)(
            delayed(_permutation_chunk)(sample, config, p0, chunk) for chunk in chunks
        )
    else:
        tallies = [_permutation_chunk(sample, config, p0, chunk) for chunk in chunks]
    exceed = sum(t[0] for t in tallies)
    failed = sum(t[1] for t in tallies)
    if failed:
        logger.info(f"{failed} of {config.m} permutations failed and were scored as p = 1")

    if config.tie_rule is TieRule.ADD_ONE:
        p_final = (1 + exceed) / (config.m + 1)
    else:
        p_final = exceed / config.m
    return TwoStepResult(p_pre=observed.p_pre, branch=observed.branch, p0=p0, p_final=p_final,
                         reject=p_final <= config.alpha, exceed_count=exceed, m=config.m,
                         failed_permutations=failed, pretest_status=observed.pretest_status)


def run_two_step(sample: SurvivalSample, config: TwoStepConfig, mode: Mode = Mode.NAIVE,
                 n_jobs: int = 1) -> TwoStepResult:
    if Mode(mode) is Mode.PERMUTATION:
        return permutation_two_step(sample, config, n_jobs=n_jobs)
    return naive_two_step(sample, config)


def parse_test_spec(data: dict, two_step: bool = False) -> TestSpec:
    """Test spec from a JSON-style dict.

    A max-combo without explicit components gets the four-weight set, or the
    same set without FH(0,0) when used as a second-step test. Explicit
    components lose their log-rank equivalents in second-step use.
    """
    kind = str(data.get('type', '')).lower()
    if kind not in ('maxcombo', 'max_combo', 'max-combo'):
        return parse_weight_spec(data)

    draws = int(data.get('mvn_draws', DEFAULT_MVN_DRAWS))
    seed = int(data.get('mvn_seed', 0))
    if 'components' not in data:
        return two_step_combo(draws, seed) if two_step else lin_combo(draws, seed)
    components = tuple(parse_weight_spec(c) for c in data['components'])
    spec = MaxComboSpec(components, mvn_draws=draws, mvn_seed=seed)
    if two_step and spec.includes_logrank():
        logger.info(f"Dropping log-rank components from second-step {spec.label}")
        return without_logrank(spec)
    return spec


def spec_to_dict(test: TestSpec) -> dict:
    if isinstance(test, MaxComboSpec):
        return {'type': 'maxcombo', 'components': [weight_to_dict(c) for c in test.components],
                'mvn_draws': test.mvn_draws, 'mvn_seed': test.mvn_seed}
    return weight_to_dict(test)
