"""
环面模型上的标定对锻造
"""
from .grid import ClosedForm, CovectorField, MetricField, TorusGrid, minimal_image, wrap01
from .curves import (
    SubmanifoldCurve,
    TubularData,
    build_tubular,
    graph_curvature_max,
    straight_circle,
    wavy_circle,
)
from .cutoffs import CutoffKind, CutoffProfile, smoothstep
from .forge import (
    ForgeResult,
    GluedForm,
    TubeVolumeForm,
    admissible_alpha,
    forge_single,
    glue_form,
    glue_metric,
    glue_metric_many,
    primitive_on_tube,
    verify_pair,
)
from .multiclass import MulticlassResult, forge_multiclass, reference_form, two_circle_model
from .dumps import dump_fields, load_fields

__all__ = [
    "ClosedForm", "CovectorField", "MetricField", "TorusGrid", "minimal_image", "wrap01",
    "SubmanifoldCurve", "TubularData", "build_tubular", "graph_curvature_max",
    "straight_circle", "wavy_circle",
    "CutoffKind", "CutoffProfile", "smoothstep",
    "ForgeResult", "GluedForm", "TubeVolumeForm", "admissible_alpha", "forge_single",
    "glue_form", "glue_metric", "glue_metric_many", "primitive_on_tube", "verify_pair",
    "MulticlassResult", "forge_multiclass", "reference_form", "two_circle_model",
    "dump_fields", "load_fields",
]
