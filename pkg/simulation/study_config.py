import json
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple

from analysis.max_combo import DEFAULT_MVN_DRAWS, lin_combo, two_step_combo
from analysis.two_step import TestSpec, TieRule, TwoStepConfig, parse_test_spec
from analysis.weights import FlemingHarrington, Modest, UnitWeight
from utils.error_handler import InputError
from .scenarios import ScenarioSpec, parse_scenario
from .trial_simulator import DAYS_PER_MONTH, TrialDesign, parse_design


class MethodKind(str, Enum):
    CONVENTIONAL = 'conventional'
    NAIVE_TWO_STEP = 'naive_two_step'
    PERMUTATION_TWO_STEP = 'permutation_two_step'


@dataclass(frozen=True)
class MethodSpec:
    id: str
    kind: MethodKind
    test: Optional[TestSpec] = None
    two_step: Optional[TwoStepConfig] = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', MethodKind(self.kind))
        if self.kind is MethodKind.CONVENTIONAL and self.test is None:
            raise InputError(f"method {self.id!r} needs a test", field='methods.test')
        if self.kind is not MethodKind.CONVENTIONAL and self.two_step is None:
            raise InputError(f"method {self.id!r} needs a two-step configuration",
                             field='methods.alternative')

    @property
    def is_two_step(self) -> bool:
        return self.kind is not MethodKind.CONVENTIONAL

    def at_alpha_pre(self, alpha_pre: float) -> 'MethodSpec':
        return replace(self, two_step=replace(self.two_step, alpha_pre=alpha_pre))


@dataclass(frozen=True)
class StudyCell:
    id: str
    scenario: ScenarioSpec
    design: TrialDesign
    hr: Optional[float] = None
    recruitment: str = ''


@dataclass(frozen=True)
class StudyConfig:
    cells: Tuple[StudyCell, ...]
    methods: Tuple[MethodSpec, ...]
    n_reps: int = 1000
    alpha: float = 0.025
    base_seed: int = 1
    alpha_pre_grid: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, 'cells', tuple(self.cells))
        object.__setattr__(self, 'methods', tuple(self.methods))
        if not self.cells:
            raise InputError("study needs at least one cell", field='cells')
        if not self.methods:
            raise InputError("study needs at least one method", field='methods')
        ids = [m.id for m in self.methods]
        if len(set(ids)) != len(ids):
            raise InputError("method ids must be unique", field='methods.id')
        if self.n_reps < 1:
            raise InputError("n_reps must be >= 1", field='n_reps')
        if not 0 < self.alpha < 1:
            raise InputError("alpha must lie in (0, 1)", field='alpha')
        if self.alpha_pre_grid is not None:
            grid = tuple(float(a) for a in self.alpha_pre_grid)
            if any(not 0 <= a <= 1 for a in grid):
                raise InputError("alpha_pre_grid values must lie in [0, 1]", field='alpha_pre_grid')
            object.__setattr__(self, 'alpha_pre_grid', grid)

    def expanded_methods(self) -> list:
        """(method, alpha_pre) pairs; two-step methods are repeated over the alpha_pre grid."""
        out = []
        for method in self.methods:
            if not method.is_two_step:
                out.append((method, None))
            elif self.alpha_pre_grid is None:
                out.append((method, method.two_step.alpha_pre))
            else:
                out.extend((method.at_alpha_pre(a), a) for a in self.alpha_pre_grid)
        return out


def alpha_pre_sweep(step: float = 0.025) -> tuple:
    """0, step, ..., 1."""
    n = int(round(1.0 / step))
    return tuple(round(i * step, 10) for i in range(n + 1))


def standard_methods(alpha_pre: float = 0.2, alpha: float = 0.025, m: int = 500, seed: int = 7,
                  mvn_draws: int = DEFAULT_MVN_DRAWS, naive: bool = True,
                  permutation: bool = False) -> list:
    """Standard panel: log-rank, FH(1,0), FH(1,1), FH(0,1), max-combo, Modest(6), Modest(12),
    plus two-step versions of every alternative."""
    alternatives = [
        ('FH(1,0)', FlemingHarrington(1, 0)),
        ('FH(1,1)', FlemingHarrington(1, 1)),
        ('FH(0,1)', FlemingHarrington(0, 1)),
        ('MaxCombo', lin_combo(mvn_draws)),
        ('Modest(6)', Modest(6)),
        ('Modest(12)', Modest(12)),
    ]
    methods = [MethodSpec('LR', MethodKind.CONVENTIONAL, test=UnitWeight())]
    methods += [MethodSpec(name, MethodKind.CONVENTIONAL, test=test) for name, test in alternatives]
    for name, test in alternatives:
        second = two_step_combo(mvn_draws) if name == 'MaxCombo' else test
        config = TwoStepConfig(second, alpha_pre=alpha_pre, alpha=alpha, m=m, seed=seed)
        if naive:
            methods.append(MethodSpec(f'nTS-{name}', MethodKind.NAIVE_TWO_STEP, two_step=config))
        if permutation:
            methods.append(MethodSpec(f'pTS-{name}', MethodKind.PERMUTATION_TWO_STEP, two_step=config))
    return methods


def _parse_method(data: dict, alpha: float, index: int) -> MethodSpec:
    where = f'methods[{index}]'
    try:
        method_id = str(data['id'])
        kind = MethodKind(data['type'])
    except KeyError as e:
        raise InputError(f"missing {e.args[0]!r}", field=f'{where}.{e.args[0]}') from e
    except ValueError as e:
        raise InputError(f"unknown method type {data.get('type')!r}", field=f'{where}.type') from e

    if kind is MethodKind.CONVENTIONAL:
        if 'test' not in data:
            raise InputError("conventional method needs 'test'", field=f'{where}.test')
        return MethodSpec(method_id, kind, test=parse_test_spec(data['test']))

    if 'alternative' not in data:
        raise InputError("two-step method needs 'alternative'", field=f'{where}.alternative')
    try:
        tie_rule = TieRule(data.get('tie_rule', TieRule.COUNT_LE.value))
    except ValueError as e:
        raise InputError(f"unknown tie rule {data.get('tie_rule')!r}", field=f'{where}.tie_rule') from e
    config = TwoStepConfig(
        parse_test_spec(data['alternative'], two_step=True),
        alpha_pre=float(data.get('alpha_pre', 0.2)),
        alpha=alpha,
        m=int(data.get('m', 500)),
        seed=int(data.get('seed', 0)),
        tie_rule=tie_rule,
        time_transform=data.get('time_transform', 'km'),
    )
    return MethodSpec(method_id, kind, two_step=config)


def _parse_cells(data: dict, index: int, days_per_month: float) -> list:
    where = f'cells[{index}]'
    for key in ('scenario', 'design'):
        if key not in data:
            raise InputError(f"missing {key!r}", field=f'{where}.{key}')
    scenario = parse_scenario(data['scenario'])
    design = parse_design(data['design'], days_per_month)
    cell_id = str(data.get('id', scenario.kind))
    recruitment = str(data['design'].get('recruitment', ''))
    hr_grid = data.get('hr_grid')
    if hr_grid is None:
        return [StudyCell(cell_id, scenario, design, data.get('hr'), recruitment)]
    return [StudyCell(cell_id, scenario.with_hr(float(hr)), design, float(hr), recruitment)
            for hr in hr_grid]


def parse_study_config(data: dict, days_per_month: float = DAYS_PER_MONTH) -> StudyConfig:
    """Study configuration from its JSON document; errors name the offending field."""
    if not isinstance(data, dict):
        raise InputError("study configuration must be a JSON object")
    alpha = float(data.get('alpha', 0.025))
    cells = []
    for i, cell in enumerate(data.get('cells') or []):
        cells.extend(_parse_cells(cell, i, days_per_month))
    methods = [_parse_method(m, alpha, i) for i, m in enumerate(data.get('methods') or [])]
    grid = data.get('alpha_pre_grid')
    if grid == 'sweep':
        grid = alpha_pre_sweep()
    return StudyConfig(
        cells=cells,
        methods=methods,
        n_reps=int(data.get('n_reps', 1000)),
        alpha=alpha,
        base_seed=int(data.get('base_seed', 1)),
        alpha_pre_grid=None if grid is None else tuple(grid),
    )


def load_study_config(path: str, days_per_month: float = DAYS_PER_MONTH) -> StudyConfig:
    try:
        with open(path, encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise InputError(f"invalid JSON: {e.msg}", line=e.lineno) from e
    except OSError as e:
        raise InputError(f"cannot read study config: {e}", field='config') from e
    return parse_study_config(data, days_per_month)
