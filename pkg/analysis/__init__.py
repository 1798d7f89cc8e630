from .weights import FlemingHarrington, Modest, UnitWeight, WeightSpec, parse_weight_spec
from .weighted_logrank import WlrtResult, weighted_logrank, wlrt_covariance
from .mvn_tail import mvn_tail, mvn_tail_with_error
from .max_combo import MaxComboResult, MaxComboSpec, lin_combo, maxcombo_test, two_step_combo
from .cox_model import CoxFit, fit_cox_binary, schoenfeld_residuals
from .ph_pretest import GtResult, gt_test, km_transform
from .two_step import (Branch, Mode, TieRule, TwoStepConfig, TwoStepResult, naive_two_step,
                       permutation_two_step, run_two_step)

__all__ = [
    "FlemingHarrington",
    "Modest",
    "UnitWeight",
    "WeightSpec",
    "parse_weight_spec",
    "WlrtResult",
    "weighted_logrank",
    "wlrt_covariance",
    "mvn_tail",
    "mvn_tail_with_error",
    "MaxComboResult",
    "MaxComboSpec",
    "lin_combo",
    "maxcombo_test",
    "two_step_combo",
    "CoxFit",
    "fit_cox_binary",
    "schoenfeld_residuals",
    "GtResult",
    "gt_test",
    "km_transform",
    "Branch",
    "Mode",
    "TieRule",
    "TwoStepConfig",
    "TwoStepResult",
    "naive_two_step",
    "permutation_two_step",
    "run_two_step",
]
