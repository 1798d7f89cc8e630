from .scenarios import (REFERENCE_SCENARIOS, DelayedScenario, NullScenario, PHScenario,
                        ProgressionScenario, SubgroupScenario, draw_latent_time)
from .trial_simulator import EventCount, EventFraction, TrialDataset, TrialDesign, simulate_trial
from .calibration import CalibrationResult, calibrate_events
from .study_config import MethodKind, MethodSpec, StudyCell, StudyConfig, load_study_config
from .study_runner import StudyRow, paired_difference, prediction_interval, run_study

__all__ = [
    "REFERENCE_SCENARIOS",
    "DelayedScenario",
    "NullScenario",
    "PHScenario",
    "ProgressionScenario",
    "SubgroupScenario",
    "draw_latent_time",
    "EventCount",
    "EventFraction",
    "TrialDataset",
    "TrialDesign",
    "simulate_trial",
    "CalibrationResult",
    "calibrate_events",
    "MethodKind",
    "MethodSpec",
    "StudyCell",
    "StudyConfig",
    "load_study_config",
    "StudyRow",
    "paired_difference",
    "prediction_interval",
    "run_study",
]
