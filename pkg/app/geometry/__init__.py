"""
逐点几何：外代数、comass 引擎、度量构造
"""
from .multilinear import (
    AltForm,
    CanonicalFrame,
    Frame,
    MetricPoint,
    canonical_frame,
    evaluate,
    gram_norm,
    hodge_star,
    pullback,
    random_form,
    random_frame,
    wedge,
)
from .comass import (
    ComassEstimate,
    ComassMethod,
    comass,
    comass_ascent,
    comass_bruteforce,
    comass_exact,
    comass_upper_bound,
    covector_field_comass,
    supports_exact,
    transversal_axis_form,
)
from .metric_lab import (
    BundlePoint,
    HLDecomposition,
    SplitWeightResult,
    bundle_point_model,
    calibration_pair_metric,
    glue_metrics,
    hl_adapted_metric,
    hl_decompose,
    hl_metric,
    minimal_hl_constant,
    normalize_pair,
    scale_metric,
    split_blocks,
    split_weight_transform,
)

__all__ = [
    "AltForm", "CanonicalFrame", "Frame", "MetricPoint",
    "canonical_frame", "evaluate", "gram_norm", "hodge_star", "pullback",
    "random_form", "random_frame", "wedge",
    "ComassEstimate", "ComassMethod", "comass", "comass_ascent", "comass_bruteforce",
    "comass_exact", "comass_upper_bound", "covector_field_comass", "supports_exact",
    "transversal_axis_form",
    "BundlePoint", "HLDecomposition", "SplitWeightResult", "bundle_point_model",
    "calibration_pair_metric", "glue_metrics", "hl_adapted_metric", "hl_decompose",
    "hl_metric", "minimal_hl_constant", "normalize_pair", "scale_metric",
    "split_blocks", "split_weight_transform",
]
