import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from analysis.two_step import cached, naive_two_step, one_sided_p, permutation_two_step
from utils.data_utils import append_study_rows, read_study_csv
from utils.error_handler import InputError, StatisticalError
from utils.logging_setup import setup_logging
from utils.random_streams import chunk_indices
from .study_config import MethodKind, MethodSpec, StudyCell, StudyConfig
from .trial_simulator import simulate_trial

logger = setup_logging('study_runner')

ERROR = -1


@dataclass(frozen=True)
class StudyRow:
    scenario: str
    method: str
    alpha_pre: Optional[float]
    hr: Optional[float]
    n: int
    recruitment: str
    rejection_rate: float
    mc_se: float
    n_reps: int
    errors: int = 0

    def to_record(self) -> dict:
        return {
            'scenario': self.scenario,
            'method': self.method,
            'alpha_pre': '' if self.alpha_pre is None else self.alpha_pre,
            'hr': '' if self.hr is None else self.hr,
            'n': self.n,
            'recruitment': self.recruitment,
            'rejection_rate': self.rejection_rate,
            'mc_se': self.mc_se,
            'n_reps': self.n_reps,
            'errors': self.errors,
        }


@dataclass
class CellOutcome:
    """Per-replicate decisions of one cell: 1 reject, 0 accept, -1 method failed."""
    cell: StudyCell
    labels: list
    decisions: np.ndarray
    rows: list = field(default_factory=list)


def prediction_interval(alpha: float, n_reps: int) -> tuple:
    """95% band for an estimated rejection rate whose true value is alpha."""
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    half = 1.96 * math.sqrt(alpha * (1.0 - alpha) / n_reps)
    return max(0.0, alpha - half), min(1.0, alpha + half)


def mc_standard_error(rate: float, n_reps: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / n_reps)


def _decide(sample, method: MethodSpec, alpha: float, cache: dict) -> int:
    if method.kind is MethodKind.CONVENTIONAL:
        p = cached(cache, ('test', method.test), lambda: one_sided_p(sample, method.test))
        return int(p <= alpha)
    if method.kind is MethodKind.NAIVE_TWO_STEP:
        return int(naive_two_step(sample, method.two_step, cache).reject)
    return int(permutation_two_step(sample, method.two_step).reject)


def _run_chunk(cell: StudyCell, cell_index: int, config: StudyConfig, methods: list,
               indices) -> np.ndarray:
    decisions = np.zeros((len(indices), len(methods)), dtype=np.int8)
    for row, rep in enumerate(indices):
        trial = simulate_trial(cell.scenario, cell.design, config.base_seed, cell_index, rep)
        # one data set for every method: the comparisons are paired
        cache = {}
        for col, method in enumerate(methods):
            try:
                decisions[row, col] = _decide(trial.sample, method, config.alpha, cache)
            except StatisticalError as e:
                logger.debug(f"Replicate {rep} of {cell.id}, method {method.id} failed: {e}")
                decisions[row, col] = ERROR
    return decisions


class StudyRunner:
    def __init__(self, settings: dict = None):
        settings = settings or {}
        self.n_jobs = int(settings.get('threads', 1))

    def run_cell(self, config: StudyConfig, cell_index: int) -> CellOutcome:
        """Simulate one grid cell and apply every method to each replicate."""
        cell = config.cells[cell_index]
        expanded = config.expanded_methods()
        methods = [m for m, _ in expanded]

        chunks = chunk_indices(config.n_reps, self.n_jobs * 4 if self.n_jobs > 1 else 1)
        if self.n_jobs > 1:
            parts = Parallel(n_jobs=self.n_jobs)(
                delayed(_run_chunk)(cell, cell_index, config, methods, chunk) for chunk in chunks
            )
        else:
            parts = [_run_chunk(cell, cell_index, config, methods, chunk) for chunk in chunks]
        decisions = np.vstack(parts)

        rows = []
        for col, (method, alpha_pre) in enumerate(expanded):
            column = decisions[:, col]
            errors = int((column == ERROR).sum())
            # failed replicates count as non-rejections
            rate = float((column == 1).sum()) / config.n_reps
            rows.append(StudyRow(
                scenario=cell.id, method=method.id, alpha_pre=alpha_pre, hr=cell.hr,
                n=cell.design.n_total, recruitment=cell.recruitment,
                rejection_rate=rate, mc_se=mc_standard_error(rate, config.n_reps),
                n_reps=config.n_reps, errors=errors,
            ))
            if errors:
                logger.warning(f"{cell.id}/{method.id}: {errors} of {config.n_reps} replicates failed")
        labels = [(m.id, a) for m, a in expanded]
        return CellOutcome(cell=cell, labels=labels, decisions=decisions, rows=rows)

    def run(self, config: StudyConfig, output_path: str = None, resume: bool = True) -> list:
        """Run every cell; rows are appended to `output_path` cell by cell.

        With `resume`, cells already present in the output file are skipped
        and their stored rows returned. Stored rows must come from the same
        replicate count and method list, otherwise InputError is raised.
        """
        keys = [_cell_key(cell) for cell in config.cells]
        if output_path and len(set(keys)) != len(keys):
            clash = next(k for k in keys if keys.count(k) > 1)
            raise InputError(f"cells share scenario/hr/n/recruitment {clash}; give them distinct ids",
                             field='cells')

        stored = {}
        previous = []
        if output_path and resume:
            existing = read_study_csv(output_path)
            for record in existing.to_dict('records'):
                row = _row_from_record(record)
                previous.append(row)
                stored.setdefault(_row_key(row), []).append(row)
            if stored:
                logger.info(f"Resuming: {len(stored)} cell(s) already in {output_path}")

        expected = sorted((m.id, _float_key(a)) for m, a in config.expanded_methods())
        rows = list(previous)
        for index, cell in enumerate(config.cells):
            if keys[index] in stored:
                _check_stored(stored[keys[index]], cell, config.n_reps, expected, output_path)
                continue
            logger.info(f"Cell {index + 1}/{len(config.cells)}: {cell.id} (HR {cell.hr}), "
                        f"{config.n_reps} replicates")
            try:
                outcome = self.run_cell(config, index)
            except Exception as e:
                logger.error(f"Failed to run cell {cell.id}: {str(e)}")
                raise
            if output_path:
                append_study_rows(outcome.rows, output_path)
            rows.extend(outcome.rows)
        return rows


def _float_key(value) -> str:
    if value is None or value == '':
        return ''
    return repr(float(value))


def _cell_key(cell: StudyCell) -> tuple:
    return cell.id, _float_key(cell.hr), int(cell.design.n_total), cell.recruitment


def _row_key(row: StudyRow) -> tuple:
    return row.scenario, _float_key(row.hr), int(row.n), row.recruitment


def _check_stored(rows: list, cell: StudyCell, n_reps: int, expected: list, path: str) -> None:
    where = f"{cell.id} (HR {cell.hr}, n {cell.design.n_total}, {cell.recruitment or 'custom'} recruitment)"
    counts = sorted({row.n_reps for row in rows})
    if counts != [n_reps]:
        raise InputError(f"{path} holds {where} with n_reps {counts}, the config asks for {n_reps}; "
                         f"rerun without resume", field='n_reps')
    found = sorted((row.method, _float_key(row.alpha_pre)) for row in rows)
    if found != expected:
        raise InputError(f"{path} holds {where} with a different method list; rerun without resume",
                         field='methods')


def _optional_float(value) -> Optional[float]:
    return None if value == '' or value is None else float(value)


def _row_from_record(record: dict) -> StudyRow:
    return StudyRow(
        scenario=str(record['scenario']), method=str(record['method']),
        alpha_pre=_optional_float(record['alpha_pre']), hr=_optional_float(record['hr']),
        n=int(record['n']), recruitment=str(record['recruitment']),
        rejection_rate=float(record['rejection_rate']), mc_se=float(record['mc_se']),
        n_reps=int(record['n_reps']), errors=int(record['errors']),
    )


def run_study(config: StudyConfig, output_path: str = None, resume: bool = True,
              settings: dict = None) -> list:
    return StudyRunner(settings).run(config, output_path, resume)


def paired_difference(outcome: CellOutcome, method_a: str, method_b: str,
                      alpha_pre: Optional[float] = None) -> tuple:
    """Difference of rejection rates a - b over the same replicates, and its SE."""
    def column(method_id):
        for col, (label, a) in enumerate(outcome.labels):
            if label == method_id and (alpha_pre is None or a is None or a == alpha_pre):
                return (outcome.decisions[:, col] == 1).astype(float)
        raise KeyError(method_id)

    diff = column(method_a) - column(method_b)
    n = len(diff)
    se = float(diff.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float(diff.mean()), se


def export_conditional_pvalues(cell: StudyCell, method: MethodSpec, n_reps: int,
                               base_seed: int, cell_index: int = 0) -> pd.DataFrame:
    """Branch taken and second-step p-value per replicate, for density plots downstream."""
    records = []
    for rep in range(n_reps):
        trial = simulate_trial(cell.scenario, cell.design, base_seed, cell_index, rep)
        try:
            result = naive_two_step(trial.sample, method.two_step)
            records.append({'replicate': rep, 'p_pre': result.p_pre, 'branch': result.branch.value,
                            'second_step_p': result.p_final})
        except StatisticalError as e:
            logger.debug(f"Replicate {rep} failed: {e}")
            records.append({'replicate': rep, 'p_pre': np.nan, 'branch': 'error',
                            'second_step_p': np.nan})
    return pd.DataFrame.from_records(records, columns=['replicate', 'p_pre', 'branch', 'second_step_p'])
