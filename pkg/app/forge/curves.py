"""
环面上的闭曲线与管状邻域
曲线以提升坐标的样本表示，周期三次样条插值；最近点投影用 cKDTree 播种、Newton 加细
"""
import itertools
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from ..errors import ConvergenceError, InvalidInputError
from .grid import TorusGrid, minimal_image, wrap01

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 4096
MIN_TUBE_RESOLUTION = 64
MAX_EPSILON_FACTOR = 0.8
WINDING_TOL = 1e-6
PROJECTION_TOL = 1e-12
UNIQUE_TOL = 1e-8
GRADIENT_TOL = 5e-2


@dataclass(frozen=True)
class Projection:
    """最近点投影结果，所有数组首维为点数"""
    parameter: np.ndarray
    delta: np.ndarray
    distance: np.ndarray
    converged: np.ndarray
    unique: np.ndarray


@dataclass(frozen=True, eq=False)
class SubmanifoldCurve:
    """
    环面中的定向闭曲线

    samples 为提升坐标 γ̃(k/K)，满足 γ̃(t+1) = γ̃(t) + winding。
    样条插值的是周期部分 γ̃(t) − t·winding。
    """
    samples: np.ndarray
    winding: np.ndarray
    orientation: int = 1
    name: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        winding = np.asarray(self.winding)
        if samples.ndim != 2 or samples.shape[1] not in (2, 3) or samples.shape[0] < 16:
            raise InvalidInputError(f"曲线样本形状 {samples.shape} 非法")
        if winding.shape != (samples.shape[1],):
            raise InvalidInputError("绕数向量维数与曲线不符")
        if not np.all(np.isfinite(samples)):
            raise InvalidInputError("曲线样本含非有限值")
        if self.orientation not in (1, -1):
            raise InvalidInputError("orientation 只能是 ±1")

        # 从约化坐标的最短位移累加得到的绕数必须与声明一致
        wrapped = wrap01(samples)
        steps = minimal_image(np.diff(np.vstack([wrapped, wrapped[:1]]), axis=0))
        measured = steps.sum(axis=0)
        if np.max(np.abs(measured - np.round(measured))) > WINDING_TOL:
            raise InvalidInputError(f"曲线绕数不是整数：{measured.tolist()}")
        if not np.array_equal(np.round(measured).astype(int), np.round(winding).astype(int)):
            raise InvalidInputError(f"声明绕数 {winding.tolist()} 与实测 {np.round(measured).tolist()} 不符")
        if not np.any(winding):
            raise InvalidInputError("零同调类的曲线不在支持范围内")

        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "winding", np.round(winding).astype(int))

    # ==================== 构造 ====================

    @classmethod
    def from_function(
        cls,
        func: Callable[[np.ndarray], np.ndarray],
        winding: Sequence[int],
        samples: int = DEFAULT_SAMPLES,
        name: str = "",
    ) -> "SubmanifoldCurve":
        """func(t) 返回 t ∈ [0,1) 处的提升坐标，形状 (K, d)"""
        t = np.arange(samples) / samples
        return cls(np.asarray(func(t), dtype=float), np.asarray(winding), name=name)

    def reversed(self) -> "SubmanifoldCurve":
        """反向曲线：γ̃(−t)，绕数取反"""
        K = self.samples.shape[0]
        idx = (-np.arange(K)) % K
        lifted = self.samples[idx] - np.where(np.arange(K)[:, None] > 0, self.winding, 0)
        return SubmanifoldCurve(lifted, -self.winding, -self.orientation, self.name)

    # ==================== 几何量 ====================

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def count(self) -> int:
        return self.samples.shape[0]

    @cached_property
    def _spline(self) -> CubicSpline:
        K = self.count
        t = np.arange(K + 1) / K
        periodic = self.samples - np.outer(np.arange(K) / K, self.winding)
        return CubicSpline(t, np.vstack([periodic, periodic[:1]]), bc_type="periodic")

    @property
    def parameters(self) -> np.ndarray:
        return np.arange(self.count) / self.count

    def position(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self._spline(t) + np.multiply.outer(t, self.winding)

    def tangent(self, t: np.ndarray) -> np.ndarray:
        return self._spline(np.asarray(t, dtype=float), 1) + self.winding

    def acceleration(self, t: np.ndarray) -> np.ndarray:
        return self._spline(np.asarray(t, dtype=float), 2)

    def curvature(self, t: np.ndarray) -> np.ndarray:
        d1 = self.tangent(t)
        d2 = self.acceleration(t)
        speed2 = np.einsum("...i,...i->...", d1, d1)
        cross2 = speed2 * np.einsum("...i,...i->...", d2, d2) - np.einsum("...i,...i->...", d1, d2) ** 2
        return np.sqrt(np.maximum(cross2, 0.0)) / speed2 ** 1.5

    @cached_property
    def length(self) -> float:
        """周期梯形公式"""
        speed = np.linalg.norm(self.tangent(self.parameters), axis=-1)
        return float(np.mean(speed))

    @cached_property
    def max_curvature(self) -> float:
        dense = np.arange(4 * self.count) / (4 * self.count)
        return float(np.max(self.curvature(dense)))

    @cached_property
    def _tree(self) -> cKDTree:
        return cKDTree(wrap01(self.samples), boxsize=1.0)

    # ==================== 自距离与 reach ====================

    def min_chord(self, exclude_arc: float, subsample: int = 512) -> float:
        """
        非相邻点对之间的最小环面距离

        Args:
            exclude_arc: 同一分支上弧长间隔小于此值的点对不计
            subsample: 参与比较的样本数
        """
        step = max(1, self.count // subsample)
        idx = np.arange(0, self.count, step)
        P = self.samples[idx]
        speed = np.linalg.norm(self.tangent(self.parameters), axis=-1)
        arc = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]))]) / self.count
        s = arc[idx]
        L = self.length
        w = self.winding.astype(float)

        diff = P[None, :, :] - P[:, None, :]
        base = -np.round(diff)
        best = np.inf
        for offset in itertools.product((-1, 0, 1), repeat=self.dim):
            shift = base + np.asarray(offset)
            dist = np.linalg.norm(diff + shift, axis=-1)
            m = np.round(shift @ w / (w @ w))
            same = np.all(np.abs(shift - m[..., None] * w) < 0.5, axis=-1)
            separation = np.abs(s[None, :] + m * L - s[:, None])
            allowed = ~(same & (separation < exclude_arc))
            if np.any(allowed):
                best = min(best, float(dist[allowed].min()))
        return best

    def check_embedded(self):
        """最小非相邻自距离须大于 10 倍样本间距"""
        spacing = self.length / self.count
        chord = self.min_chord(exclude_arc=20.0 * spacing)
        if chord <= 10.0 * spacing:
            raise InvalidInputError(f"曲线 {self.name or ''} 非嵌入：最小自距离 {chord:.3e}")

    @cached_property
    def reach(self) -> float:
        """min(1/κ_max, 自距离的一半)"""
        kappa = self.max_curvature
        if kappa < 1e-12:
            chord = self.min_chord(exclude_arc=np.inf)
            return 0.5 * chord
        return min(1.0 / kappa, 0.5 * self.min_chord(exclude_arc=np.pi / kappa))

    # ==================== 最近点投影 ====================

    def _newton(self, points: np.ndarray, t0: np.ndarray, max_iter: int = 60) -> Tuple[np.ndarray, np.ndarray]:
        t = t0.astype(float).copy()
        converged = np.zeros(t.shape, dtype=bool)
        max_step = 4.0 / self.count
        for _ in range(max_iter):
            active = ~converged
            if not np.any(active):
                break
            ta = t[active]
            delta = minimal_image(points[active] - self.position(ta))
            d1 = self.tangent(ta)
            d2 = self.acceleration(ta)
            speed2 = np.einsum("ij,ij->i", d1, d1)
            numer = np.einsum("ij,ij->i", delta, d1)
            denom = speed2 - np.einsum("ij,ij->i", delta, d2)
            denom = np.where(denom > 0.1 * speed2, denom, speed2)
            step = np.clip(numer / denom, -max_step, max_step)
            t[active] = ta + step
            converged[active] = np.abs(step) < PROJECTION_TOL
        return np.mod(t, 1.0), converged

    def project(self, points: np.ndarray) -> Projection:
        """
        逐点求最近曲线参数

        从 KD 树给出的两个最近样本分别出发做 Newton 迭代，
        取距离较小者；两者收敛到同一参数时视为投影唯一
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        _, nearest = self._tree.query(wrap01(points), k=2)
        results = [self._newton(points, nearest[:, j] / self.count) for j in range(2)]

        def _offset(t):
            delta = minimal_image(points - self.position(t))
            return delta, np.linalg.norm(delta, axis=-1)

        (t1, c1), (t2, c2) = results
        delta1, dist1 = _offset(t1)
        delta2, dist2 = _offset(t2)
        pick = dist2 < dist1
        t = np.where(pick, t2, t1)
        delta = np.where(pick[:, None], delta2, delta1)
        dist = np.where(pick, dist2, dist1)
        gap = np.abs(minimal_image(t1 - t2))
        return Projection(
            parameter=t,
            delta=delta,
            distance=dist,
            converged=c1 & c2,
            unique=c1 & c2 & (gap < UNIQUE_TOL),
        )


# ==================== 模型曲线 ====================

def straight_circle(
    base: Sequence[float], winding: Sequence[int], samples: int = DEFAULT_SAMPLES, name: str = "straight"
) -> SubmanifoldCurve:
    base = np.asarray(base, dtype=float)
    winding = np.asarray(winding)
    return SubmanifoldCurve.from_function(lambda t: base + np.outer(t, winding), winding, samples, name)


def wavy_circle(amplitude: float, samples: int = DEFAULT_SAMPLES, height: float = 0.5) -> SubmanifoldCurve:
    """y = height + A·sin(2πx)，绕数 (1, 0)"""
    if not 0.0 <= amplitude < 0.25:
        raise InvalidInputError(f"振幅 {amplitude} 超出 [0, 0.25)")

    def _lift(t):
        return np.stack([t, height + amplitude * np.sin(2.0 * np.pi * t)], axis=-1)

    return SubmanifoldCurve.from_function(_lift, (1, 0), samples, name="wavy")


def graph_curvature_max(amplitude: float) -> float:
    """y = A sin 2πx 的最大曲率 (2π)²A，出现在波峰处"""
    return (2.0 * np.pi) ** 2 * amplitude


# ==================== 管状邻域 ====================

@dataclass(frozen=True, eq=False)
class TubularData:
    """
    曲线的管状邻域数据

    parameter / delta / distance 对所有节点给出（投影总是计算），
    mask 标记 d < ε 的节点
    """
    curve: SubmanifoldCurve
    grid: TorusGrid
    reach: float
    epsilon: float
    parameter: np.ndarray
    delta: np.ndarray
    distance: np.ndarray
    mask: np.ndarray
    gradient_defect: float

    def foot(self) -> np.ndarray:
        return self.curve.position(self.parameter)

    def outside(self, radius: Optional[float] = None) -> np.ndarray:
        return self.distance >= (self.epsilon if radius is None else radius)


def build_tubular(
    M: SubmanifoldCurve,
    grid: TorusGrid,
    epsilon_factor: float = MAX_EPSILON_FACTOR,
    epsilon_cap: Optional[float] = None,
) -> TubularData:
    """
    构造管状邻域：reach 估计、逐节点投影、距离场与有效掩码

    Args:
        M: 嵌入闭曲线
        grid: 周期网格（每轴分辨率 ≥ 64）
        epsilon_factor: ε = factor·reach，不超过 0.8
        epsilon_cap: ε 的额外上界（多曲线模型用于保证管不相交）
    """
    if grid.dim != M.dim:
        raise InvalidInputError(f"曲线维数 {M.dim} 与网格维数 {grid.dim} 不符")
    if min(grid.resolution) < MIN_TUBE_RESOLUTION:
        raise InvalidInputError(f"管状邻域要求每轴分辨率 ≥ {MIN_TUBE_RESOLUTION}")
    if not 0.0 < epsilon_factor <= MAX_EPSILON_FACTOR:
        raise InvalidInputError(f"epsilon_factor 须在 (0, {MAX_EPSILON_FACTOR}]，得到 {epsilon_factor}")
    M.check_embedded()

    reach = M.reach
    epsilon = epsilon_factor * reach
    if epsilon_cap is not None:
        epsilon = min(epsilon, epsilon_cap)
    logger.info(f"曲线 {M.name}: reach={reach:.6f}, ε={epsilon:.6f}")

    nodes = grid.nodes().reshape(-1, grid.dim)
    proj = M.project(nodes)
    mask = proj.distance < epsilon

    bad = mask & ~proj.unique
    if np.any(bad):
        where = np.flatnonzero(bad)
        located = [np.unravel_index(int(i), grid.shape) for i in where[:10]]
        logger.warning(f"投影在 {where.size} 个管内节点失败，首个节点 {[int(i) for i in located[0]]}")
        raise ConvergenceError(
            f"Newton 投影在管内 {where.size} 个节点不收敛或不唯一（ε 过大？）",
            nodes=[[int(v) for v in ix] for ix in located],
        )

    distance = proj.distance.reshape(grid.shape)
    mask = mask.reshape(grid.shape)

    # |∇d| = 1，只在远离曲线本身与管边界的节点上检验
    grad = np.linalg.norm(grid.gradient(distance), axis=-1)
    interior = mask & (distance > 2.0 * grid.h) & (distance < epsilon - 2.0 * grid.h)
    defect = float(np.max(np.abs(grad[interior] - 1.0))) if np.any(interior) else 0.0
    if defect > GRADIENT_TOL:
        logger.warning(f"距离场梯度偏差 {defect:.3e} 超过 {GRADIENT_TOL}")

    return TubularData(
        curve=M,
        grid=grid,
        reach=reach,
        epsilon=epsilon,
        parameter=proj.parameter.reshape(grid.shape),
        delta=proj.delta.reshape(grid.shape + (grid.dim,)),
        distance=distance,
        mask=mask,
        gradient_defect=defect,
    )
