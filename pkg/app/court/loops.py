"""
环面上的加权分段线性闭路（离散一维流）
质量为度量下的加权长度，用每边 5 点 Gauss–Legendre 求积；周期配对对闭形式取精确值，对一般余向量场用同一套求积
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import InvalidInputError
from ..forge.grid import ClosedForm, MetricField, minimal_image, wrap01
from ..models import LoopPayload

logger = logging.getLogger(__name__)

EDGE_POINTS = 5
WINDING_TOL = 1e-9
ZERO_EDGE = 1e-14
MIN_COMPLEXITY = 3


def _edge_quadrature():
    nodes, weights = np.polynomial.legendre.leggauss(EDGE_POINTS)
    return 0.5 * (nodes + 1.0), 0.5 * weights


_TAU, _WEIGHTS = _edge_quadrature()


def _merge_zero_edges(vertices: np.ndarray, winding: np.ndarray) -> np.ndarray:
    """删去零长度边的终点，直到所有边（含闭合边）非零"""
    while len(vertices) > 1:
        closed = np.vstack([vertices, vertices[:1] + winding])
        keep = np.linalg.norm(np.diff(closed, axis=0), axis=1) > ZERO_EDGE
        if np.all(keep):
            break
        select = np.concatenate([[True], keep[:-1]])
        if not keep[-1]:
            select[-1] = False
        vertices = vertices[select]
    if len(vertices) == 1 and not np.any(winding):
        raise InvalidInputError("闭路退化为一点")
    return vertices


@dataclass(frozen=True, eq=False)
class PLLoop:
    """
    分段线性闭路

    vertices 为提升坐标，最后一条边从末顶点连到 vertices[0] + winding
    """
    vertices: np.ndarray
    winding: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        winding = np.asarray(self.winding, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] not in (2, 3):
            raise InvalidInputError(f"顶点形状 {vertices.shape} 非法")
        if winding.shape != (vertices.shape[1],):
            raise InvalidInputError("绕数维数与顶点不符")
        if np.max(np.abs(winding - np.round(winding))) > WINDING_TOL:
            raise InvalidInputError(f"绕数不是整数: {winding.tolist()}")
        if not np.all(np.isfinite(vertices)) or not np.isfinite(self.weight):
            raise InvalidInputError("闭路含非有限值")
        winding = np.round(winding).astype(int)

        kept = _merge_zero_edges(vertices, winding)
        object.__setattr__(self, "vertices", kept)
        object.__setattr__(self, "winding", winding)
        object.__setattr__(self, "weight", float(self.weight))

    @classmethod
    def from_torus_points(cls, points: Sequence[Sequence[float]], weight: float = 1.0) -> "PLLoop":
        """由约化坐标顶点构造：相邻顶点取最短位移，绕数由闭合边推出"""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        steps = minimal_image(np.diff(np.vstack([points, points[:1]]), axis=0))
        lifted = points[0] + np.vstack([np.zeros(points.shape[1]), np.cumsum(steps[:-1], axis=0)])
        winding = steps.sum(axis=0)
        if np.max(np.abs(winding - np.round(winding))) > WINDING_TOL:
            raise InvalidInputError(f"闭路绕数不是整数: {winding.tolist()}")
        return cls(lifted, np.round(winding).astype(int), weight)

    @classmethod
    def straight(
        cls, base: Sequence[float], winding: Sequence[int], count: int = 64, weight: float = 1.0
    ) -> "PLLoop":
        base = np.asarray(base, dtype=float)
        t = np.arange(count) / count
        return cls(base + np.outer(t, winding), np.asarray(winding), weight)

    @classmethod
    def from_curve(cls, curve, weight: float = 1.0) -> "PLLoop":
        """光滑曲线的样本折线"""
        return cls(curve.samples, curve.winding, weight)

    @classmethod
    def from_payload(cls, payload: LoopPayload) -> "PLLoop":
        return cls(np.asarray(payload.vertices), np.asarray(payload.winding), payload.weight)

    def to_payload(self) -> LoopPayload:
        return LoopPayload(vertices=self.vertices.tolist(), winding=self.winding.tolist(), weight=self.weight)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def edges(self) -> np.ndarray:
        closed = np.vstack([self.vertices, self.vertices[:1] + self.winding])
        return np.diff(closed, axis=0)

    def quadrature_points(self) -> np.ndarray:
        """形状 (边数, 5, d) 的提升坐标"""
        return self.vertices[:, None, :] + _TAU[None, :, None] * self.edges[:, None, :]

    # ==================== 变换 ====================

    def scaled(self, weight: float) -> "PLLoop":
        return PLLoop(self.vertices, self.winding, self.weight * weight)

    def reversed(self) -> "PLLoop":
        rev = np.vstack([self.vertices[:1], self.vertices[:0:-1] - self.winding])
        return PLLoop(rev, -self.winding, self.weight)

    def rotated(self, k: int) -> "PLLoop":
        """起点移到第 k 个顶点"""
        k = k % len(self.vertices)
        rotated = np.vstack([self.vertices[k:], self.vertices[:k] + self.winding])
        return PLLoop(rotated, self.winding, self.weight)

    def refined(self) -> "PLLoop":
        """每条边在中点处一分为二"""
        mids = self.vertices + 0.5 * self.edges
        interleaved = np.empty((2 * len(self.vertices), self.dim))
        interleaved[0::2] = self.vertices
        interleaved[1::2] = mids
        return PLLoop(interleaved, self.winding, self.weight)


# ==================== 质量与周期 ====================

def calibration_ratios(loop: PLLoop, Phi, g: MetricField) -> np.ndarray:
    """各求积点处 Φ(γ')/|γ'|_g，形状 (边数, 5)"""
    points = wrap01(loop.quadrature_points().reshape(-1, loop.dim))
    edges = np.repeat(loop.edges, EDGE_POINTS, axis=0)
    G = g.sample(points)
    lengths = np.sqrt(np.einsum("mi,mij,mj->m", edges, G, edges))
    values = np.einsum("mi,mi->m", Phi.sample(points), edges)
    return (values / lengths).reshape(-1, EDGE_POINTS)


def pl_mass(loop: PLLoop, g: MetricField) -> float:
    """|w|·Σ_边 ∫ √(g(γ', γ'))"""
    points = wrap01(loop.quadrature_points().reshape(-1, loop.dim))
    edges = np.repeat(loop.edges, EDGE_POINTS, axis=0)
    G = g.sample(points)
    lengths = np.sqrt(np.einsum("mi,mij,mj->m", edges, G, edges)).reshape(-1, EDGE_POINTS)
    return abs(loop.weight) * float(np.sum(lengths @ _WEIGHTS))


def period_pairing(loop: PLLoop, Phi) -> float:
    """
    w·∮ Φ

    闭形式 h + dU 的线积分只依赖同调类，直接取 w·h(winding)；
    一般余向量场按插值值逐边求积
    """
    if isinstance(Phi, ClosedForm):
        return loop.weight * Phi.period(loop.winding)
    points = wrap01(loop.quadrature_points().reshape(-1, loop.dim))
    edges = np.repeat(loop.edges, EDGE_POINTS, axis=0)
    values = np.einsum("mi,mi->m", Phi.sample(points), edges).reshape(-1, EDGE_POINTS)
    return loop.weight * float(np.sum(values @ _WEIGHTS))


# ==================== 竞争者 ====================

def random_competitor(
    winding: Sequence[int],
    seed,
    complexity: int = MIN_COMPLEXITY,
    amplitude: float = 0.15,
    count: Optional[int] = None,
) -> PLLoop:
    """
    给定同调类的随机闭路：直线闭路加 complexity 个 Fourier 扰动

    第 k 个模的系数在 [−amplitude/k, amplitude/k] 内均匀取；
    允许自交（流不必嵌入）

    Args:
        winding: 同调类
        seed: 随机种子（整数或 SeedSequence）
        complexity: Fourier 模数，≥ 3
        amplitude: 扰动幅度上界，0 时退化为直线闭路
        count: 顶点数，缺省 max(128, 64·complexity)
    """
    if complexity < MIN_COMPLEXITY:
        raise InvalidInputError(f"complexity 须 ≥ {MIN_COMPLEXITY}，得到 {complexity}")
    if amplitude < 0:
        raise InvalidInputError("amplitude 须非负")
    w = np.asarray(winding)
    d = w.shape[0]
    rng = np.random.default_rng(seed)
    base = rng.random(d)
    count = count or max(128, 64 * complexity)
    t = np.arange(count) / count
    path = base + np.outer(t, w)
    for k in range(1, complexity + 1):
        a = rng.uniform(-1.0, 1.0, d) * amplitude / k
        b = rng.uniform(-1.0, 1.0, d) * amplitude / k
        path = path + np.outer(np.sin(2 * np.pi * k * t), a) + np.outer(np.cos(2 * np.pi * k * t) - 1.0, b)
    return PLLoop(path, w)
