"""
T³ 中两条不交圆周的多重标定
Φ₁ 在 M₂ 的管上消失、Φ₂ 在 M₁ 的管上消失，共用一个 g̃，使 ±Φ₁、±Φ₂、±Φ₁±Φ₂ 同时为标定
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from ..errors import InvalidInputError, TubeOverlapError
from ..geometry.comass import covector_field_comass
from ..models import MulticlassReport, SignCombination
from .curves import SubmanifoldCurve, TubularData, build_tubular, straight_circle
from .cutoffs import CutoffProfile
from .forge import (
    admissible_alpha,
    glue_form,
    glue_metric_many,
    resolution_scale,
    verify_pair,
    ON_CURVE_TOL,
)
from .grid import ClosedForm, MetricField, TorusGrid, wrap01

logger = logging.getLogger(__name__)

MULTICLASS_TOL = 5e-3
MARGIN = 0.5
SEPARATION_SHARE = 0.35


def two_circle_model(samples: int = 4096):
    """M₁ = x 向圆周 (·, 0.25, 0.25)，M₂ = y 向圆周 (0.25, ·, 0.75)"""
    M1 = straight_circle((0.0, 0.25, 0.25), (1, 0, 0), samples, name="M1")
    M2 = straight_circle((0.25, 0.0, 0.75), (0, 1, 0), samples, name="M2")
    return M1, M2


def dual_class(winding: Sequence[int]) -> np.ndarray:
    """周期 (w·w) 归一到 1 的常系数形式"""
    w = np.asarray(winding, dtype=float)
    return w / (w @ w)


def curve_separation(M1: SubmanifoldCurve, M2: SubmanifoldCurve) -> float:
    tree = cKDTree(wrap01(M2.samples), boxsize=1.0)
    dist, _ = tree.query(wrap01(M1.samples))
    return float(np.min(dist))


def reference_form(
    grid: TorusGrid,
    harmonic: Sequence[float],
    vanish_near: Sequence[TubularData] = (),
    keep_clear: Optional[TubularData] = None,
    outer: Optional[float] = None,
) -> ClosedForm:
    """
    常系数闭形式，在给定曲线的管上减去 D(χ·x̃) 使之消失

    x̃ = c·(δ + γ̃(t) − γ̃(0)) 为管上的单值局部势，要求 c 沿该曲线周期为零。

    Args:
        grid: 网格
        harmonic: 调和部分（常系数）
        vanish_near: 需消失的曲线的管状邻域
        keep_clear: 主曲线的管，χ 的支集不得与之相交
        outer: χ 的外半径，缺省为曲线 reach 的一半
    """
    c = np.asarray(harmonic, dtype=float)
    potential = np.zeros(grid.shape)
    for tube in vanish_near:
        curve = tube.curve
        if abs(c @ curve.winding) > 1e-12:
            raise InvalidInputError(f"形式沿曲线 {curve.name} 的周期非零，无法在其管上消失")
        inner = tube.epsilon + 2.0 * grid.h
        radius = outer if outer is not None else 0.5 * curve.reach
        if not inner < radius < curve.reach:
            raise InvalidInputError(f"χ 的外半径 {radius:.4g} 须介于 {inner:.4g} 与 reach {curve.reach:.4g} 之间")
        chi = CutoffProfile.chi(inner, radius)
        support = tube.distance < radius
        if keep_clear is not None and np.any(support & keep_clear.mask):
            raise TubeOverlapError(f"曲线 {curve.name} 的截断支集与 {keep_clear.curve.name} 的管相交")
        offset = tube.delta + curve.position(tube.parameter) - curve.position(np.zeros(1))[0]
        local = offset @ c
        potential -= np.where(support, chi(tube.distance) * local, 0.0)
    return ClosedForm.build(grid, c, potential)


@dataclass(frozen=True, eq=False)
class MulticlassResult:
    Phi1: ClosedForm
    Phi2: ClosedForm
    metric: MetricField
    tubes: List[TubularData]
    alpha: float
    report: MulticlassReport
    fields: Dict[str, np.ndarray] = field(default_factory=dict)


def _on_curve_comass(form, metric: MetricField, curve: SubmanifoldCurve) -> np.ndarray:
    points = wrap01(curve.position(curve.parameters))
    return covector_field_comass(form.sample(points), metric.sample(points))


def forge_multiclass(
    grid: TorusGrid,
    M1: SubmanifoldCurve,
    M2: SubmanifoldCurve,
    epsilon_factor: float = 0.8,
) -> MulticlassResult:
    """
    构造 (Φ₁, Φ₂, g̃) 并检验全部八种符号组合

    α 取使两形式在各自管外 comass ≤ 1/2 的二分根乘安全系数
    """
    if grid.dim != 3:
        raise InvalidInputError("多重标定模型只在 T³ 上定义")
    separation = curve_separation(M1, M2)
    cap = SEPARATION_SHARE * separation
    T1 = build_tubular(M1, grid, epsilon_factor, epsilon_cap=cap)
    T2 = build_tubular(M2, grid, epsilon_factor, epsilon_cap=cap)
    if np.any(T1.mask & T2.mask):
        raise TubeOverlapError("两条曲线的管状邻域相交")
    outer = 0.5 * separation

    phi1 = reference_form(grid, dual_class(M1.winding), [T2], keep_clear=T1, outer=outer)
    phi2 = reference_form(grid, dual_class(M2.winding), [T1], keep_clear=T2, outer=outer)
    glued1 = glue_form(M1, T1, phi1, grid)
    glued2 = glue_form(M2, T2, phi2, grid)
    Phi1, Phi2 = glued1.Phi, glued2.Phi

    flat = MetricField.flat(grid)
    c1 = Phi1.comass_under(flat)
    c2 = Phi2.comass_under(flat)
    alpha = admissible_alpha([
        (float(np.max(c1[T1.outside()])), MARGIN),
        (float(np.max(c2[T2.outside()])), MARGIN),
    ])
    sigma1 = CutoffProfile.sigma(T1.epsilon)
    sigma2 = CutoffProfile.sigma(T2.epsilon)
    metric = glue_metric_many([(Phi1, T1, sigma1), (Phi2, T2, sigma2)], grid, alpha)

    violations: List[str] = []
    combinations = []
    for s1, s2 in itertools.product((1, -1, 0), repeat=2):
        if s1 == 0 and s2 == 0:
            continue
        form = Phi1 * s1 + Phi2 * s2
        peak = float(np.max(form.comass_under(metric)))
        ok = peak <= 1.0 + MULTICLASS_TOL
        if not ok:
            violations.append(f"组合 ({s1:+d}Φ₁, {s2:+d}Φ₂) 的 comass 最大值 {peak:.6f}")
        combinations.append(SignCombination(signs=[s1, s2], comass_max=peak, passed=ok))

    on_tol = ON_CURVE_TOL * resolution_scale(grid)
    on_curve: Dict[str, float] = {}
    for label, form, curve in (
        ("Phi1_on_M1", Phi1, M1),
        ("Phi2_on_M2", Phi2, M2),
        ("sum_on_M1", Phi1 + Phi2, M1),
        ("sum_on_M2", Phi1 + Phi2, M2),
    ):
        values = _on_curve_comass(form, metric, curve)
        on_curve[f"{label}_min"] = float(values.min())
        on_curve[f"{label}_max"] = float(values.max())
        if np.max(np.abs(values - 1.0)) > on_tol:
            violations.append(f"{label} 未在曲线上达到 1（范围 [{values.min():.6f}, {values.max():.6f}]）")

    # −Φ₁ 在反向的 M₁ 上取值
    reversed_M1 = M1.reversed()
    t = reversed_M1.parameters
    points = wrap01(reversed_M1.position(t))
    tangent = reversed_M1.tangent(t)
    G = metric.sample(points)
    lengths = np.sqrt(np.einsum("mi,mij,mj->m", tangent, G, tangent))
    values = np.einsum("mi,mi->m", (-Phi1).sample(points), tangent) / lengths
    reversed_value = float(np.mean(values))
    if abs(reversed_value - 1.0) > on_tol:
        violations.append(f"−Φ₁ 在反向 M₁ 上的取值 {reversed_value:.6f}")

    margins = {
        "Phi1_outside_U1": float(np.max(Phi1.comass_under(metric)[T1.outside()])),
        "Phi2_outside_U2": float(np.max(Phi2.comass_under(metric)[T2.outside()])),
    }
    for label, value in margins.items():
        if value > MARGIN + MULTICLASS_TOL:
            violations.append(f"{label} = {value:.6f} 超过 1/2 余量")

    certifications = {
        "M1": verify_pair(Phi1, metric, M1, grid, T1, extras={"alpha": alpha, "epsilon": T1.epsilon, "reach": T1.reach}),
        "M2": verify_pair(Phi2, metric, M2, grid, T2, extras={"alpha": alpha, "epsilon": T2.epsilon, "reach": T2.reach}),
    }
    for name, cert in certifications.items():
        violations.extend(f"{name}: {v}" for v in cert.violations)

    d_phi = max(Phi1.curl_residual(), Phi2.curl_residual())
    report = MulticlassReport(
        combinations=combinations,
        on_curve=on_curve,
        reversed_orientation_value=reversed_value,
        margins=margins,
        certifications=certifications,
        alpha=alpha,
        epsilons={"M1": T1.epsilon, "M2": T2.epsilon},
        separation=separation,
        d_phi_max=d_phi,
        violations=violations,
        passed=not violations,
    )
    logger.info(f"多重标定: α={alpha:.6g}, 通过={report.passed}")
    return MulticlassResult(
        Phi1=Phi1,
        Phi2=Phi2,
        metric=metric,
        tubes=[T1, T2],
        alpha=alpha,
        report=report,
        fields={"Phi1": Phi1.values, "Phi2": Phi2.values, "metric": metric.values},
    )
