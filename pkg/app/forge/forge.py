"""
标定对的锻造
φ 粘合为 Φ（管内等于 ω*，管外等于 φ），Φ 与平坦度量粘合为 g̃，再在网格上认证 (Φ, g̃)
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import bisect
from scipy.spatial import cKDTree

from ..errors import AdmissibilityError, InvalidInputError, PeriodError, TubeOverlapError
from ..geometry.comass import covector_field_comass
from ..models import CertificationReport
from .curves import GRADIENT_TOL, SubmanifoldCurve, TubularData, build_tubular
from .cutoffs import CutoffKind, CutoffProfile
from .grid import ClosedForm, CovectorField, MetricField, TorusGrid, wrap01

logger = logging.getLogger(__name__)

REFERENCE_RESOLUTION = 256
DPHI_TOL = 1e-4
COMASS_TOL = 2e-3
ON_CURVE_TOL = 1e-3
LOCUS_DELTA = 1e-3
CLOSURE_TOL = 1e-5
PERIOD_TOL = 1e-5
PERIOD_LOOPS = 50
ALPHA_SAFETY = 1.1
GAUSS_POINTS = 8


class SampledCovector(Protocol):
    def sample(self, points: np.ndarray) -> np.ndarray:
        ...


def resolution_scale(grid: TorusGrid) -> float:
    """二阶量的容差放大系数 (256/N)²"""
    return (REFERENCE_RESOLUTION / min(grid.resolution)) ** 2


def gauss_legendre_unit(count: int) -> Tuple[np.ndarray, np.ndarray]:
    """[0,1] 上的 Gauss–Legendre 节点与权重"""
    nodes, weights = np.polynomial.legendre.leggauss(count)
    return 0.5 * (nodes + 1.0), 0.5 * weights


# ==================== ω* 与管上原函数 ====================

@dataclass(frozen=True, eq=False)
class TubeVolumeForm:
    """
    ω* = s·π*ω / Vol(M)

    曲线长度元经最近点投影拉回：dt = γ'·dx / (|γ'|² − δ·γ'')，
    故 ω* = (s/L)·|γ'|·γ' / (|γ'|² − δ·γ'')
    """
    tube: TubularData
    period: float

    def _evaluate(self, t: np.ndarray, delta: np.ndarray) -> np.ndarray:
        curve = self.tube.curve
        d1 = curve.tangent(t)
        d2 = curve.acceleration(t)
        speed2 = np.einsum("...i,...i->...", d1, d1)
        denom = speed2 - np.einsum("...i,...i->...", delta, d2)
        scale = self.period / curve.length * np.sqrt(speed2) / denom
        return scale[..., None] * d1

    def sample(self, points: np.ndarray) -> np.ndarray:
        proj = self.tube.curve.project(np.atleast_2d(points))
        return self._evaluate(proj.parameter, proj.delta)

    def on_grid(self) -> np.ndarray:
        """节点值，仅在管内有意义"""
        return self._evaluate(self.tube.parameter, self.tube.delta)


@dataclass(frozen=True, eq=False)
class _Difference:
    left: SampledCovector
    right: SampledCovector

    def sample(self, points: np.ndarray) -> np.ndarray:
        return self.left.sample(points) - self.right.sample(points)


@dataclass(frozen=True, eq=False)
class TubePrimitive:
    """管上原函数 ψ：管外为 0"""
    values: np.ndarray
    closure_residual: float
    along: CubicSpline


def primitive_on_tube(
    beta: SampledCovector,
    tube: TubularData,
    quadrature: int = GAUSS_POINTS,
    closure_tol: float = CLOSURE_TOL,
) -> TubePrimitive:
    """
    在管上积分闭形式 beta 得到 ψ，dψ = beta

    路径：从参数 0 的曲线点出发，先沿曲线到垂足，再沿法向线段到节点。

    Args:
        beta: 可插值取样的闭余向量场，沿 M 的周期为零
        tube: 管状邻域
        quadrature: 法向线段上的 Gauss–Legendre 点数
        closure_tol: 沿曲线积分回路的闭合容差
    """
    curve = tube.curve
    K = curve.count
    t = curve.parameters
    integrand = np.einsum("ij,ij->i", beta.sample(curve.position(t)), curve.tangent(t))
    increments = 0.5 * (integrand + np.roll(integrand, -1)) / K
    running = np.concatenate([[0.0], np.cumsum(increments)])
    closure = float(running[-1])
    if abs(closure) > closure_tol:
        raise PeriodError("沿 M 的积分不闭合，beta 的周期非零", closure)

    knots = np.arange(K + 1) / K
    along = CubicSpline(knots, running - closure * knots, bc_type="periodic")

    values = np.zeros(tube.grid.shape)
    mask = tube.mask
    if np.any(mask):
        tm = tube.parameter[mask]
        dm = tube.delta[mask]
        foot = curve.position(tm)
        r, w = gauss_legendre_unit(quadrature)
        points = foot[:, None, :] + r[None, :, None] * dm[:, None, :]
        sampled = beta.sample(points.reshape(-1, curve.dim)).reshape(points.shape)
        normal = np.einsum("mqd,md,q->m", sampled, dm, w)
        values[mask] = along(tm) + normal
    logger.debug(f"ψ 闭合残差 {closure:.3e}")
    return TubePrimitive(values=values, closure_residual=abs(closure), along=along)


def primitive_residual(psi: np.ndarray, beta_nodes: np.ndarray, tube: TubularData) -> float:
    """管内部（模板不越过管边界）的 |Dψ − beta| 最大值"""
    grid = tube.grid
    inner = tube.mask & (tube.distance < tube.epsilon - 2.0 * grid.h)
    if not np.any(inner):
        return 0.0
    defect = np.linalg.norm(grid.gradient(psi) - beta_nodes, axis=-1)
    return float(np.max(defect[inner]))


# ==================== 形式粘合 ====================

@dataclass(frozen=True, eq=False)
class GluedForm:
    Phi: ClosedForm
    omega: TubeVolumeForm
    psi: TubePrimitive
    rho: CutoffProfile
    period: float
    psi_residual: float


def glue_form(
    M: SubmanifoldCurve,
    tube: TubularData,
    phi: ClosedForm,
    grid: TorusGrid,
    rho: Optional[CutoffProfile] = None,
) -> GluedForm:
    """
    Φ = φ − D(ρψ)，其中 dψ = φ − ω*

    管内 d ≤ 3ε/5 时 Φ = ω*，d ≥ 4ε/5 时 Φ = φ；离散闭性由势函数表示保证
    """
    if tube.curve is not M or tube.grid != grid:
        raise InvalidInputError("管状邻域与曲线或网格不匹配")
    s = phi.period(M.winding)
    if s <= 0:
        raise InvalidInputError(f"φ 沿 M 的周期须为正，得到 {s}")

    omega = TubeVolumeForm(tube, s)
    psi = primitive_on_tube(_Difference(phi, omega), tube)
    rho = rho or CutoffProfile.rho(tube.epsilon)
    weight = np.where(tube.mask, rho(tube.distance), 0.0)
    Phi = phi.minus_exact(weight * psi.values)

    beta_nodes = phi.values - omega.on_grid()
    residual = primitive_residual(psi.values, beta_nodes, tube)
    logger.info(f"Φ 粘合完成: 周期 s={s:.6f}, |Dψ − β| = {residual:.3e}")
    return GluedForm(Phi=Phi, omega=omega, psi=psi, rho=rho, period=s, psi_residual=residual)


# ==================== 度量粘合 ====================

def admissible_alpha(
    constraints: Sequence[Tuple[float, float]],
    safety: float = ALPHA_SAFETY,
) -> float:
    """
    满足 peak·α^{-1/2} ≤ target 的最小 α（二分），再乘安全系数

    Args:
        constraints: (comass 峰值, 目标上界) 列表
        safety: 安全系数
    """
    constraints = [(float(p), float(t)) for p, t in constraints if p > 0]
    if not constraints:
        return safety
    need = max((p / t) ** 2 for p, t in constraints)

    def excess(alpha: float) -> float:
        return max(p / np.sqrt(alpha) - t for p, t in constraints)

    root = bisect(excess, 0.25 * need, 4.0 * need, xtol=1e-12 * need, rtol=1e-14)
    alpha = safety * root
    logger.info(f"α = {alpha:.6g}（二分根 {root:.6g} × {safety}）")
    return alpha


def glue_metric_many(
    pieces: Sequence[Tuple[CovectorField, TubularData, CutoffProfile]],
    grid: TorusGrid,
    alpha: float,
    base: Optional[MetricField] = None,
    m: int = 1,
) -> MetricField:
    """
    g̃ = Σ σᵢ^{1/m}(1+dᵢ²)(‖Φᵢ‖*_g)^{2/m}·g + α(1 − Σσᵢ)^{1/m}·g

    各 σᵢ 的支集须互不相交
    """
    if alpha <= 0:
        raise InvalidInputError(f"α 须为正，得到 {alpha}")
    base = base or MetricField.flat(grid)
    local = np.zeros(grid.shape)
    total = np.zeros(grid.shape)
    for Phi, tube, sigma in pieces:
        c = Phi.comass_under(base)
        worst = int(np.argmax(c))
        peak = float(c.flat[worst])
        if peak / np.sqrt(alpha) >= 1.0:
            index = np.unravel_index(worst, grid.shape)
            raise AdmissibilityError(
                f"α={alpha:.6g} 过小：comass(Φ, α·g) 在节点 {[int(i) for i in index]} 处为 {peak / np.sqrt(alpha):.6g} ≥ 1",
                minimal=peak ** 2,
                node=grid.node_coordinates(index),
            )
        weight = np.where(tube.mask, sigma(tube.distance), 0.0)
        local += weight ** (1.0 / m) * (1.0 + tube.distance ** 2) * c ** (2.0 / m)
        total += weight
    if np.any(total > 1.0 + 1e-12):
        raise TubeOverlapError("多个 σ 的支集相交")
    factor = local + alpha * np.clip(1.0 - total, 0.0, 1.0) ** (1.0 / m)
    return MetricField(grid, factor[..., None, None] * base.values)


def glue_metric(
    Phi: CovectorField,
    tube: TubularData,
    grid: TorusGrid,
    alpha: float,
    sigma: Optional[CutoffProfile] = None,
    base: Optional[MetricField] = None,
) -> MetricField:
    sigma = sigma or CutoffProfile.sigma(tube.epsilon)
    return glue_metric_many([(Phi, tube, sigma)], grid, alpha, base)


# ==================== 认证 ====================

def locus_allowance_cells(grid: TorusGrid, delta: float = LOCUS_DELTA) -> float:
    """
    等号集允许宽度（格距单位）

    σ ≡ 1 区域内 comass = (1+d²)^{-1/2}，超过 1−δ 的带宽为 √((1−δ)^{-2} − 1)，另加两格
    """
    return float(np.sqrt((1.0 - delta) ** -2 - 1.0) / grid.h + 2.0)


def _distance_to_curve(M: SubmanifoldCurve, grid: TorusGrid, tube: Optional[TubularData]) -> np.ndarray:
    if tube is not None:
        return tube.distance
    return M.project(grid.nodes().reshape(-1, grid.dim)).distance.reshape(grid.shape)


def verify_pair(
    Phi: CovectorField,
    metric: MetricField,
    M: SubmanifoldCurve,
    grid: TorusGrid,
    tube: Optional[TubularData] = None,
    delta: float = LOCUS_DELTA,
    extras: Optional[Dict[str, Any]] = None,
    seed: int = 0,
    period_loops: int = PERIOD_LOOPS,
) -> CertificationReport:
    """
    网格认证：dΦ 残差、comass 统计、等号集位置、周期不变性

    不抛异常，所有失败都写入报告的 violations

    Args:
        seed: 周期检验闭路的随机种子，第 i 条由 SeedSequence(seed).spawn(period_loops)[i] 决定
        period_loops: 与 M 同调的随机闭路条数
    """
    from ..court.loops import PLLoop, period_pairing, random_competitor

    scale = resolution_scale(grid)
    thresholds = {
        "d_phi_max": DPHI_TOL,
        "comass_max": 1.0 + COMASS_TOL,
        "comass_on_M": ON_CURVE_TOL * scale,
        "locus_delta": delta,
        "period": PERIOD_TOL,
        "tube_gradient": GRADIENT_TOL,
    }
    violations: List[str] = []

    reference = period_pairing(PLLoop.from_curve(M), Phi)
    period_deviation = 0.0
    for child in np.random.SeedSequence(seed).spawn(period_loops):
        loop = random_competitor(M.winding, child)
        period_deviation = max(period_deviation, abs(period_pairing(loop, Phi) - reference))

    d_phi = grid.curl_residual(Phi.values)
    comass = Phi.comass_under(metric)
    distance = _distance_to_curve(M, grid, tube)

    worst = int(np.argmax(comass))
    index = np.unravel_index(worst, grid.shape)
    worst_node = {
        "index": [int(i) for i in index],
        "coords": grid.node_coordinates(index).tolist(),
        "comass": float(comass.flat[worst]),
        "distance_to_M": float(distance.flat[worst]),
    }
    comass_max = worst_node["comass"]

    t = M.parameters
    points = wrap01(M.position(t))
    on_curve = covector_field_comass(Phi.sample(points), metric.sample(points))
    deviation = int(np.argmax(np.abs(on_curve - 1.0)))
    on_value = float(on_curve[deviation])

    locus = comass > 1.0 - delta
    if np.any(locus):
        far = float(np.max(distance[locus]))
        nodes = wrap01(grid.nodes()[locus])
        near_dist, _ = cKDTree(nodes, boxsize=1.0).query(points)
        hausdorff = max(far, float(np.max(near_dist))) / grid.h
    else:
        hausdorff = None
    allowance = locus_allowance_cells(grid, delta)

    if d_phi > DPHI_TOL:
        violations.append(f"dΦ 残差 {d_phi:.3e} 超过 {DPHI_TOL:.0e}")
    if comass_max > thresholds["comass_max"]:
        violations.append(
            f"comass 最大值 {comass_max:.6f} 超过 {thresholds['comass_max']:.6f}，"
            f"位于节点 {worst_node['index']}（坐标 {np.round(worst_node['coords'], 6).tolist()}，"
            f"距 M {worst_node['distance_to_M']:.4g}）"
        )
    if abs(on_value - 1.0) > thresholds["comass_on_M"]:
        where = np.round(points[deviation], 6).tolist()
        violations.append(f"M 上 comass {on_value:.6f} 偏离 1 超过 {thresholds['comass_on_M']:.2e}，位于 {where}")
    if hausdorff is None:
        violations.append("等号集为空")
    elif hausdorff > allowance:
        violations.append(f"等号集到 M 的 Hausdorff 距离 {hausdorff:.2f} 格超过 {allowance:.2f} 格")
    if period_deviation > PERIOD_TOL:
        violations.append(f"同调闭路上的周期偏差 {period_deviation:.3e} 超过 {PERIOD_TOL:.0e}，Φ 不是闭形式")
    if tube is not None and tube.gradient_defect > GRADIENT_TOL:
        violations.append(f"管内距离场梯度偏差 {tube.gradient_defect:.3e} 超过 {GRADIENT_TOL}")

    return CertificationReport(
        d_phi_max=d_phi,
        comass_max=comass_max,
        comass_on_M=on_value,
        comass_on_M_min=float(on_curve.min()),
        comass_on_M_max=float(on_curve.max()),
        equality_locus_hausdorff_cells=hausdorff,
        locus_allowance_cells=allowance,
        period_max_deviation=period_deviation,
        tube_gradient_defect=tube.gradient_defect if tube is not None else None,
        passed=not violations,
        worst_node=worst_node,
        violations=violations,
        thresholds=thresholds,
        resolution=min(grid.resolution),
        **(extras or {}),
    )


# ==================== 单曲线流水线 ====================

@dataclass(frozen=True, eq=False)
class ForgeResult:
    curve: SubmanifoldCurve
    tube: TubularData
    glued: GluedForm
    Phi: ClosedForm
    metric: MetricField
    alpha: float
    report: CertificationReport
    fields: Dict[str, np.ndarray] = field(default_factory=dict)


def corrupted_rho(epsilon: float) -> CutoffProfile:
    """负对照：ρ 的平台推过 ε，管边界处 ρψ 被截断"""
    return CutoffProfile(CutoffKind.RHO, 1.05 * epsilon, 1.25 * epsilon)


def forge_single(
    M: SubmanifoldCurve,
    phi: ClosedForm,
    grid: TorusGrid,
    epsilon_factor: float = 0.8,
    corrupt_rho: bool = False,
) -> ForgeResult:
    """
    单曲线模型：管状邻域 → Φ → α → g̃ → 认证

    corrupt_rho 时按正常流程构造 g̃，再用平台外推的 ρ 重新粘合 Φ 并对其认证
    """
    tube = build_tubular(M, grid, epsilon_factor)
    glued = glue_form(M, tube, phi, grid)
    sigma = CutoffProfile.sigma(tube.epsilon)

    peak = float(np.max(glued.Phi.comass_under(MetricField.flat(grid))))
    alpha = admissible_alpha([(peak, 1.0)])
    metric = glue_metric(glued.Phi, tube, grid, alpha, sigma)

    certified = glued
    if corrupt_rho:
        logger.warning("负对照：使用平台外推的 ρ")
        certified = glue_form(M, tube, phi, grid, rho=corrupted_rho(tube.epsilon))

    report = verify_pair(
        certified.Phi,
        metric,
        M,
        grid,
        tube,
        extras={
            "alpha": alpha,
            "epsilon": tube.epsilon,
            "reach": tube.reach,
            "profiles": {"rho": certified.rho.describe(), "sigma": sigma.describe()},
            "psi_residual": certified.psi_residual,
            "closure_residual": certified.psi.closure_residual,
        },
    )
    comass_field = certified.Phi.comass_under(metric)
    return ForgeResult(
        curve=M,
        tube=tube,
        glued=certified,
        Phi=certified.Phi,
        metric=metric,
        alpha=alpha,
        report=report,
        fields={
            "Phi": certified.Phi.values,
            "metric": metric.values,
            "distance": tube.distance,
            "comass": comass_field,
        },
    )
