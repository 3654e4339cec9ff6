"""
逐点度量构造
共形缩放、凸组合粘合、Harvey–Lawson 分解与适配度量、圆盘丛切空间模型、分块权重变换
"""
import logging
from dataclasses import dataclass
from math import comb
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import block_diag, null_space

from ..errors import AdmissibilityError, DegenerateError, InvalidInputError
from .comass import comass
from .multilinear import (
    DEGENERATE_TOL,
    AltForm,
    Frame,
    MetricPoint,
    evaluate,
    gram_norm,
    index_tuples,
    plucker_coordinates,
    pullback,
)

logger = logging.getLogger(__name__)

BLOCK_TOL = 1e-12

# 三块与四块情形的固定指数模板；带截断函数的变体见下面两个函数
STAR_EXPONENTS = (1.0, 1.0, -1.0)
STAR_PRIME_EXPONENTS = (1.0, 1.0, 1.0, -2.0)


def asterisk_exponents(sigma: float) -> Tuple[float, float, float]:
    """三块，随截断值 σ 变化：g₁ → f g₁，g₂ → f^σ g₂，g₃ → f^{−σ} g₃"""
    return (1.0, sigma, -sigma)


def asterisk_prime_exponents(sigma_product: float) -> Tuple[float, float, float, float]:
    """四块，随 σ₁σ₂ 变化：前两块 f^{σ₁σ₂}，第三块 f，第四块 f^{−2σ₁σ₂}"""
    return (sigma_product, sigma_product, 1.0, -2.0 * sigma_product)


# ==================== 缩放与粘合 ====================

def scale_metric(g: MetricPoint, f: float) -> MetricPoint:
    """f·g；配合 comass 给出 ‖φ‖*_{fg} = f^{−p/2}‖φ‖*_g"""
    if not f > 0:
        raise InvalidInputError(f"缩放因子必须为正，得到 {f}")
    return g.scaled(f)


def glue_metrics(a: float, g1: MetricPoint, b: float, g2: MetricPoint) -> MetricPoint:
    """a·g₁ + b·g₂，a, b > 0"""
    if g1.n != g2.n:
        raise InvalidInputError(f"度量维数不一致: {g1.n} vs {g2.n}")
    if not (a > 0 and b > 0):
        raise InvalidInputError(f"粘合系数必须为正，得到 a={a}, b={b}")
    return MetricPoint(a * g1.entries + b * g2.entries)


def gluing_bound(a: float, c1: float, b: float, c2: float, p: int) -> float:
    """a·g₁ + b·g₂ 下 comass 的上界 1/√(a^p/c₁² + b^p/c₂²)"""
    terms = 0.0
    for weight, c in ((a, c1), (b, c2)):
        if c > 0:
            terms += weight ** p / c ** 2
        else:
            return 0.0
    return 1.0 / np.sqrt(terms)


def calibration_pair_metric(phi: AltForm, g: MetricPoint, **comass_options) -> MetricPoint:
    """
    共形缩放 (‖φ‖*_g)^{2/p}·g，使 φ 的 comass 恰为 1

    Args:
        phi: 非零 p 次形式（p ≥ 1）
        g: 度量
    """
    if phi.p == 0:
        raise InvalidInputError("0 次形式不能通过共形缩放调整 comass")
    value = comass(phi, g, **comass_options).lower
    if value <= DEGENERATE_TOL:
        raise DegenerateError("形式在该点为零，无法构造标定对")
    return g.scaled(value ** (2.0 / phi.p))


def normalize_pair(phi: AltForm, g: MetricPoint, alpha: float) -> Tuple[AltForm, MetricPoint]:
    """ĝ = α⁻¹g，φ̂ = α^{−p/2}φ；comass 不变"""
    if not alpha > 0:
        raise InvalidInputError("α 必须为正")
    return phi * alpha ** (-phi.p / 2.0), g.scaled(1.0 / alpha)


# ==================== Harvey–Lawson 分解 ====================

@dataclass(frozen=True)
class HLDecomposition:
    """
    φ 关于单向量 ξ 的适配分解

    Attributes:
        theta: φ(ξ)/‖ξ‖_g
        V: span(ξ) 的 g-正交规范基（与 ξ 同向）
        W: 适配补空间
        residual: φ/θ 在适配对偶基 (v*, w*) 下去掉首项后的系数
        normalized: φ/θ 在适配对偶基下的全部系数
    """
    theta: float
    V: np.ndarray
    W: Frame
    residual: AltForm
    normalized: AltForm

    @property
    def basis(self) -> np.ndarray:
        return np.hstack([self.V, self.W.vectors])

    def pattern_violation(self) -> float:
        """恰含 p−1 个 {1..p} 指标的系数的最大绝对值（应为 0）"""
        p = self.residual.p
        worst = 0.0
        for idx, c in zip(index_tuples(self.residual.n, p), self.residual.coeffs):
            if sum(1 for i in idx if i < p) == p - 1:
                worst = max(worst, abs(float(c)))
        return worst


def _oriented_orthonormal(X: np.ndarray, G: np.ndarray, orientation: int) -> np.ndarray:
    L = np.linalg.cholesky(X.T @ G @ X)
    V = X @ np.linalg.inv(L).T
    if orientation < 0:
        V[:, 0] *= -1.0
    return V


def hl_decompose(
    phi: AltForm,
    xi: Frame,
    g: Optional[MetricPoint] = None,
    complement: Optional[Frame] = None,
) -> HLDecomposition:
    """
    Harvey–Lawson 分解：唯一的定向补空间 W，使 φ 在 ξ 的任意 (p−1) 子标架加上 w ∈ W 后取值为 0

    先用 θ = φ(ξ)/‖ξ‖_g 归一化，再从初始补空间（缺省为 g-正交补）出发做显式线性修正
    w ↦ w − Σⱼ cⱼ(w) vⱼ，其中 cⱼ(w) 为把 w 代入第 j 个位置的取值。

    Args:
        phi: p 次形式，1 ≤ p < n
        xi: p 向量标架
        g: 度量，缺省为单位度量
        complement: 初始补空间（n−p 个向量），缺省为 g-正交补

    Returns:
        HLDecomposition
    """
    g = g or MetricPoint.identity(phi.n)
    n, p = phi.n, phi.p
    if xi.count != p or xi.n != n or g.n != n:
        raise InvalidInputError("φ、ξ、g 的维数或次数不一致")
    if not 1 <= p < n:
        raise InvalidInputError(f"需要 1 ≤ p < n，得到 p={p}")

    theta = evaluate(phi, xi) / gram_norm(xi, g)
    if abs(theta) <= DEGENERATE_TOL:
        raise DegenerateError(f"φ(ξ) ≈ 0（θ = {theta:.3e}），无法分解")
    normalized = phi / theta
    G = g.entries
    V = _oriented_orthonormal(xi.vectors, G, xi.orientation)

    if complement is None:
        U = null_space(V.T @ G)
    else:
        U = np.array(complement.vectors, dtype=float)
        if U.shape != (n, n - p):
            raise InvalidInputError(f"初始补空间应为 {n - p} 个向量")
        if np.linalg.matrix_rank(np.hstack([V, U])) < n:
            raise DegenerateError("初始补空间与 span(ξ) 不横截")

    # cⱼ(u)：把 u 代入 V 的第 j 列
    substituted = np.repeat(V[None, None], U.shape[1], axis=0).repeat(p, axis=1)
    for j in range(p):
        substituted[:, j, :, j] = U.T
    c = (plucker_coordinates(substituted.reshape(-1, n, p)) @ normalized.coeffs).reshape(U.shape[1], p)
    W = U - V @ c.T

    if np.linalg.det(np.hstack([V, W])) < 0:
        W[:, 0] *= -1.0

    adapted = pullback(normalized, np.hstack([V, W]))
    residual_coeffs = adapted.coeffs.copy()
    residual_coeffs[0] = 0.0  # 首项 v*₁∧…∧v*_p
    if abs(adapted.coeffs[0] - 1.0) > 1e-8:
        logger.warning("适配基下首项系数 %.12f 偏离 1", adapted.coeffs[0])
    return HLDecomposition(
        theta=float(theta),
        V=V,
        W=Frame(W),
        residual=AltForm(n, p, residual_coeffs),
        normalized=adapted,
    )


def _adapted_entries(dec: HLDecomposition, g: MetricPoint, weight: float) -> np.ndarray:
    B = dec.basis
    p = dec.V.shape[1]
    Wv = dec.W.vectors
    inner = block_diag(np.eye(p), weight * (Wv.T @ g.entries @ Wv))
    B_inv = np.linalg.inv(B)
    return B_inv.T @ inner @ B_inv


def hl_adapted_metric(dec: HLDecomposition, g: MetricPoint) -> MetricPoint:
    """⟨,⟩_V ⊕ ⟨,⟩_W，V ⊥ W 且 ‖ξ‖ = 1"""
    return MetricPoint(_adapted_entries(dec, g, 1.0))


def minimal_hl_constant(
    phi: AltForm, xi: Frame, g: Optional[MetricPoint] = None, **comass_options
) -> float:
    """可允许 C 的下确界：C² > C(n,p)·‖φ‖*_{g_adapted}/θ（上界取 comass 证书）"""
    g = g or MetricPoint.identity(phi.n)
    dec = hl_decompose(phi, xi, g)
    if dec.theta <= 0:
        raise InvalidInputError("θ 必须为正；请反转 ξ 的定向")
    certificate = comass(phi, hl_adapted_metric(dec, g), **comass_options).upper
    return float(np.sqrt(comb(phi.n, phi.p) * certificate / dec.theta))


def hl_metric(
    phi: AltForm, xi: Frame, g: Optional[MetricPoint], C: float, **comass_options
) -> MetricPoint:
    """
    适配度量 ⟨,⟩_V ⊕ C²⟨,⟩_W

    在结果度量下 comass(φ) = θ 且 φ(ξ) = θ·‖ξ‖。
    C 低于阈值时抛出 AdmissibilityError，携带最小可允许 C。
    """
    g = g or MetricPoint.identity(phi.n)
    dec = hl_decompose(phi, xi, g)
    if dec.theta <= 0:
        raise InvalidInputError("θ 必须为正；请反转 ξ 的定向")
    certificate = comass(phi, hl_adapted_metric(dec, g), **comass_options).upper
    threshold = comb(phi.n, phi.p) * certificate / dec.theta
    if not C * C > threshold:
        raise AdmissibilityError(f"C = {C} 不满足 C² > {threshold:.6g}", np.sqrt(threshold))
    return MetricPoint(_adapted_entries(dec, g, C * C))


# ==================== 圆盘丛切空间模型 ====================

@dataclass(frozen=True)
class BundlePoint:
    """零截面上一点的切空间模型"""
    phi: AltForm
    g: MetricPoint
    tangent_frame: Frame
    horizontal_frame: Frame


def bundle_point_model(angles: Sequence[float], m: int, q: int) -> BundlePoint:
    """
    eᵢ = sinθᵢ·aᵢ + cosθᵢ·bᵢ 的切空间模型

    aᵢ 为水平方向（坐标 1..m），纤维方向为坐标 m+1..m+q；倾斜的 eᵢ 依次占用不同的纤维方向。
    π*ω 是零化纤维、在 (e₁,…,e_m) 上取值 1 的单形式。

    Args:
        angles: m 个角 θᵢ ∈ (0, π/2]
        m: 水平维数
        q: 纤维维数
    """
    angles = np.asarray(angles, dtype=float)
    if m < 1 or q < 1:
        raise InvalidInputError("需要 m ≥ 1 且 q ≥ 1")
    if angles.shape != (m,):
        raise InvalidInputError(f"需要 {m} 个角，得到 {angles.size} 个")
    if np.any(angles <= 0) or np.any(angles > np.pi / 2 + 1e-15):
        raise InvalidInputError("角度必须位于 (0, π/2]")
    tilted = [i for i in range(m) if angles[i] < np.pi / 2]
    if len(tilted) > q:
        raise InvalidInputError(f"{len(tilted)} 个倾斜方向超过纤维维数 {q}")

    n = m + q
    eye = np.eye(n)
    E = eye[:, :m] * np.sin(angles)
    for slot, i in enumerate(tilted):
        E[:, i] += np.cos(angles[i]) * eye[:, m + slot]

    phi = AltForm.axis(n, list(range(1, m + 1)), 1.0 / float(np.prod(np.sin(angles))))
    return BundlePoint(
        phi=phi,
        g=MetricPoint.identity(n),
        tangent_frame=Frame(E),
        horizontal_frame=Frame(eye[:, :m]),
    )


# ==================== 分块权重变换 ====================

@dataclass(frozen=True)
class SplitWeightResult:
    metric: MetricPoint
    dims: Tuple[int, ...]
    exponents: Tuple[float, ...]
    f: float

    def volume_factor(self, blocks: Sequence[int]) -> float:
        """所选坐标块张成子空间的体积元放大倍数 Π f^{eᵢ·dimᵢ/2}"""
        power = sum(self.exponents[i] * self.dims[i] for i in blocks)
        return float(self.f ** (power / 2.0))

    def comass_factor(self, blocks: Sequence[int]) -> float:
        """该子空间体积形式的 comass 变化倍数"""
        return 1.0 / self.volume_factor(blocks)


def split_blocks(g: MetricPoint, dims: Sequence[int]) -> List[MetricPoint]:
    """取出对角块；非对角块不为零时报错"""
    if sum(dims) != g.n or any(d < 1 for d in dims):
        raise InvalidInputError(f"块维数 {list(dims)} 与 n={g.n} 不符")
    edges = np.cumsum([0] + list(dims))
    G = g.entries
    blocks = []
    for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        off = np.delete(G[lo:hi], np.s_[lo:hi], axis=1)
        if off.size and np.max(np.abs(off)) > BLOCK_TOL:
            raise InvalidInputError(f"度量在第 {i} 块之外有非零耦合，不是分块对角的")
        blocks.append(MetricPoint(G[lo:hi, lo:hi]))
    return blocks


def split_weight_transform(
    blocks: Sequence[Tuple[MetricPoint, float]],
    f: float,
    preserve_volume: bool = False,
) -> SplitWeightResult:
    """
    分块对角度量，第 i 块乘以 f^{exponentᵢ}

    Args:
        blocks: (块度量, 权重指数) 列表
        f: 权重，f ≥ 1
        preserve_volume: 为 True 时要求 Σ exponentᵢ·dimᵢ = 0
    """
    if not f >= 1:
        raise InvalidInputError(f"权重 f 必须 ≥ 1，得到 {f}")
    if not blocks:
        raise InvalidInputError("至少需要一个块")
    dims = tuple(block.n for block, _ in blocks)
    exponents = tuple(float(e) for _, e in blocks)
    if preserve_volume and abs(sum(e * d for e, d in zip(exponents, dims))) > 1e-12:
        raise InvalidInputError(f"指数 {exponents} 不保持总体积")
    entries = block_diag(*[(f ** e) * block.entries for block, e in blocks])
    return SplitWeightResult(MetricPoint(entries), dims, exponents, float(f))
