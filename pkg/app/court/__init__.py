"""
离散流与质量最小化试验
"""
from .loops import PLLoop, calibration_ratios, period_pairing, pl_mass, random_competitor
from .trials import delta_for_resolution, minimization_trial, multiclass_trial, run_trial

__all__ = [
    "PLLoop", "calibration_ratios", "period_pairing", "pl_mass", "random_competitor",
    "delta_for_resolution", "minimization_trial", "multiclass_trial", "run_trial",
]
