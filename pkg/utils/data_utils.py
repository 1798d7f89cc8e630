import math
import os

import numpy as np
import pandas as pd

from survival.sample import Group, SurvivalSample
from .error_handler import InputError
from .logging_setup import setup_logging

logger = setup_logging('data_utils')

SAMPLE_COLUMNS = ('time', 'event', 'group')
TRIAL_COLUMNS = ('time', 'event', 'group', 'entry', 'admin_censored')
STUDY_COLUMNS = ('scenario', 'method', 'alpha_pre', 'hr', 'n', 'recruitment',
                 'rejection_rate', 'mc_se', 'n_reps', 'errors')


def _parse_time(raw: str, line: int) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise InputError(f"time {raw!r} is not a number", field='time', line=line) from None
    if not math.isfinite(value) or value < 0:
        raise InputError(f"time must be finite and >= 0, got {raw!r}", field='time', line=line)
    return value


def _parse_event(raw: str, line: int) -> bool:
    key = str(raw).strip()
    if key in ('0', '1', '0.0', '1.0'):
        return key.startswith('1')
    raise InputError(f"event must be 0 or 1, got {raw!r}", field='event', line=line)


def _parse_group(raw: str, line: int) -> int:
    try:
        return int(Group.parse(str(raw)))
    except ValueError:
        raise InputError(f"group must be control/treatment or 0/1, got {raw!r}",
                         field='group', line=line) from None


def load_sample_csv(path: str) -> SurvivalSample:
    """Read `time,event,group[,entry]` into a SurvivalSample.

    Errors carry the 1-based line number of the offending row (header = line 1).
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except FileNotFoundError:
        raise InputError(f"input file not found: {path}", field='input') from None
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise InputError(f"cannot parse CSV: {e}", field='input') from e

    frame.columns = [str(c).strip().lower() for c in frame.columns]
    missing = [c for c in SAMPLE_COLUMNS if c not in frame.columns]
    if missing:
        raise InputError(f"missing column(s): {', '.join(missing)}", field='header', line=1)
    if frame.empty:
        raise InputError("no data rows", field='input')

    time, event, group = [], [], []
    for offset, row in enumerate(frame.itertuples(index=False)):
        line = offset + 2
        record = row._asdict()
        time.append(_parse_time(record['time'], line))
        event.append(_parse_event(record['event'], line))
        group.append(_parse_group(record['group'], line))

    sample = SurvivalSample(np.array(time), np.array(event), np.array(group))
    logger.info(f"Loaded {len(sample)} records ({sample.n_events} events) from {path}")
    return sample


def trial_frame(dataset) -> pd.DataFrame:
    sample = dataset.sample
    return pd.DataFrame({
        'time': sample.time,
        'event': sample.event.astype(int),
        'group': np.where(sample.group == int(Group.TREATMENT), 'treatment', 'control'),
        'entry': dataset.entry,
        'admin_censored': dataset.admin_censored.astype(int),
    }, columns=list(TRIAL_COLUMNS))


def save_trial_csv(dataset, path) -> None:
    """Write a simulated trial as `time,event,group,entry,admin_censored`."""
    try:
        trial_frame(dataset).to_csv(path, index=False, encoding='utf-8', lineterminator='\n')
        logger.info(f"Wrote {len(dataset.sample)} subjects to {path}")
    except OSError as e:
        logger.error(f"Failed to write trial CSV {path}: {str(e)}")
        raise


def append_study_rows(rows: list, path: str) -> None:
    """Append study rows, writing the header when the file is new."""
    frame = pd.DataFrame([r.to_record() for r in rows], columns=list(STUDY_COLUMNS))
    new_file = not os.path.exists(path) or os.path.getsize(path) == 0
    try:
        frame.to_csv(path, mode='a', header=new_file, index=False, encoding='utf-8',
                     lineterminator='\n')
    except OSError as e:
        logger.error(f"Failed to append study rows to {path}: {str(e)}")
        raise


def read_study_csv(path: str) -> pd.DataFrame:
    if not os.path.exists(path) or os.path.getsize(path) == 0:
        return pd.DataFrame(columns=list(STUDY_COLUMNS))
    frame = pd.read_csv(path, keep_default_na=False, float_precision='round_trip',
                        dtype={'scenario': str, 'method': str, 'recruitment': str})
    missing = [c for c in STUDY_COLUMNS if c not in frame.columns]
    if missing:
        raise InputError(f"{path} is not a study results file (missing {', '.join(missing)})",
                         field='output')
    return frame
