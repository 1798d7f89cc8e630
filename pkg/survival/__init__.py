from .sample import Group, SubjectRecord, SurvivalSample
from .risk_table import RiskTable, build_risk_table
from .kaplan_meier import KmCurve, km_estimate, pooled_km

__all__ = [
    "Group",
    "SubjectRecord",
    "SurvivalSample",
    "RiskTable",
    "build_risk_table",
    "KmCurve",
    "km_estimate",
    "pooled_km",
]
