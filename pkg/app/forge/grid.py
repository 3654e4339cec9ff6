"""
周期网格与网格场
单位平坦环面 [0,1)^d 上每轴 N 个节点 x = i/N，离散外微分为周期中心差分，
场在任意点的取值为双线性 / 三线性插值
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.ndimage import map_coordinates

from ..errors import InvalidInputError
from ..geometry.comass import covector_field_comass

logger = logging.getLogger(__name__)


def wrap01(points: np.ndarray) -> np.ndarray:
    """约化到 [0, 1)，避免 -0.0 取模得到 1.0"""
    wrapped = points - np.floor(points)
    return np.where(wrapped >= 1.0, 0.0, wrapped)


def minimal_image(vectors: np.ndarray) -> np.ndarray:
    """环面上的最短位移代表元"""
    return vectors - np.round(vectors)


@dataclass(frozen=True)
class TorusGrid:
    """单位环面上的规则周期网格"""
    dim: int
    resolution: Tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise InvalidInputError(f"只支持 2 维或 3 维环面，得到 {self.dim}")
        resolution = tuple(int(r) for r in self.resolution)
        if len(resolution) != self.dim or min(resolution) < 8:
            raise InvalidInputError(f"分辨率 {resolution} 非法")
        object.__setattr__(self, "resolution", resolution)

    @classmethod
    def cubic(cls, dim: int, n: int) -> "TorusGrid":
        return cls(dim, (n,) * dim)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.resolution

    @property
    def spacing(self) -> np.ndarray:
        return 1.0 / np.asarray(self.resolution, dtype=float)

    @property
    def h(self) -> float:
        return float(np.max(self.spacing))

    def nodes(self) -> np.ndarray:
        """节点坐标，形状 (*shape, d)"""
        axes = [np.arange(n) / n for n in self.resolution]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def node_coordinates(self, index: Sequence[int]) -> np.ndarray:
        return np.asarray(index, dtype=float) * self.spacing

    # ---------- 离散微分 ----------

    def gradient(self, u: np.ndarray) -> np.ndarray:
        """标量场的中心差分梯度，形状 (*shape, d)"""
        if u.shape != self.shape:
            raise InvalidInputError(f"标量场形状 {u.shape} 与网格 {self.shape} 不符")
        parts = [
            (np.roll(u, -1, axis=a) - np.roll(u, 1, axis=a)) / (2.0 * self.spacing[a])
            for a in range(self.dim)
        ]
        return np.stack(parts, axis=-1)

    def _partial(self, u: np.ndarray, axis: int) -> np.ndarray:
        return (np.roll(u, -1, axis=axis) - np.roll(u, 1, axis=axis)) / (2.0 * self.spacing[axis])

    def curl(self, values: np.ndarray) -> np.ndarray:
        """离散外微分 dΦ：2 维为标量，3 维为三个分量"""
        if values.shape != self.shape + (self.dim,):
            raise InvalidInputError(f"余向量场形状 {values.shape} 与网格不符")
        if self.dim == 2:
            return self._partial(values[..., 1], 0) - self._partial(values[..., 0], 1)
        return np.stack([
            self._partial(values[..., 2], 1) - self._partial(values[..., 1], 2),
            self._partial(values[..., 0], 2) - self._partial(values[..., 2], 0),
            self._partial(values[..., 1], 0) - self._partial(values[..., 0], 1),
        ], axis=-1)

    def curl_residual(self, values: np.ndarray) -> float:
        return float(np.max(np.abs(self.curl(values))))

    # ---------- 插值 ----------

    def sample(self, field: np.ndarray, points: np.ndarray) -> np.ndarray:
        """
        周期多线性插值

        Args:
            field: 形状 (*shape, ...) 的节点值
            points: 形状 (m, d) 的任意坐标（自动约化）

        Returns:
            形状 (m, ...) 的插值
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        trailing = field.shape[self.dim:]
        flat = field.reshape(self.shape + (-1,))
        coords = (wrap01(points) * np.asarray(self.resolution)).T
        columns = [
            map_coordinates(flat[..., c], coords, order=1, mode="grid-wrap")
            for c in range(flat.shape[-1])
        ]
        return np.stack(columns, axis=-1).reshape((points.shape[0],) + trailing)


# ==================== 网格场 ====================

@dataclass(frozen=True, eq=False)
class MetricField:
    """每个节点上的 d×d 对称正定矩阵"""
    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        expected = self.grid.shape + (self.grid.dim, self.grid.dim)
        if self.values.shape != expected:
            raise InvalidInputError(f"度量场形状 {self.values.shape} 应为 {expected}")
        eigen = np.linalg.eigvalsh(self.values)[..., 0]
        if not np.all(eigen > 0):
            bad = np.unravel_index(int(np.argmin(eigen)), self.grid.shape)
            raise InvalidInputError(
                f"度量场在节点 {[int(i) for i in bad]}（坐标 {self.grid.node_coordinates(bad).tolist()}）不正定"
            )

    @classmethod
    def flat(cls, grid: TorusGrid, scale: float = 1.0) -> "MetricField":
        values = np.broadcast_to(scale * np.eye(grid.dim), grid.shape + (grid.dim, grid.dim))
        return cls(grid, np.array(values))

    def scaled(self, f: float) -> "MetricField":
        return MetricField(self.grid, f * self.values)

    def sample(self, points: np.ndarray) -> np.ndarray:
        return self.grid.sample(self.values, points)


@dataclass(frozen=True, eq=False)
class CovectorField:
    """节点上的余向量场（一次形式）"""
    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        expected = self.grid.shape + (self.grid.dim,)
        if self.values.shape != expected:
            raise InvalidInputError(f"余向量场形状 {self.values.shape} 应为 {expected}")

    def sample(self, points: np.ndarray) -> np.ndarray:
        return self.grid.sample(self.values, points)

    def curl_residual(self) -> float:
        return self.grid.curl_residual(self.values)

    def comass_under(self, metric: Union[MetricField, np.ndarray]) -> np.ndarray:
        """逐节点 comass"""
        entries = metric.values if isinstance(metric, MetricField) else metric
        return covector_field_comass(self.values, entries)

    def __add__(self, other: "CovectorField") -> "CovectorField":
        return CovectorField(self.grid, self.values + other.values)

    def __sub__(self, other: "CovectorField") -> "CovectorField":
        return CovectorField(self.grid, self.values - other.values)

    def __neg__(self) -> "CovectorField":
        return CovectorField(self.grid, -self.values)

    def __mul__(self, scalar: float) -> "CovectorField":
        return CovectorField(self.grid, float(scalar) * self.values)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class ClosedForm(CovectorField):
    """
    闭一次形式：调和部分（常系数）加上势函数的离散微分

    节点值 = harmonic + D(potential)，中心差分算子的离散旋度恒为零，
    周期由调和部分精确给出。
    """
    harmonic: np.ndarray
    potential: np.ndarray

    @classmethod
    def build(
        cls, grid: TorusGrid, harmonic: Sequence[float], potential: Optional[np.ndarray] = None
    ) -> "ClosedForm":
        harmonic = np.asarray(harmonic, dtype=float)
        if harmonic.shape != (grid.dim,):
            raise InvalidInputError(f"调和部分应有 {grid.dim} 个分量")
        if potential is None:
            potential = np.zeros(grid.shape)
        values = harmonic + grid.gradient(potential)
        return cls(grid, values, harmonic, np.asarray(potential, dtype=float))

    @classmethod
    def from_values(cls, grid: TorusGrid, values: np.ndarray, tol: float = 1e-9) -> Optional["ClosedForm"]:
        """
        由节点值恢复 harmonic + D(potential) 分解

        调和部分取均值，势函数在 Fourier 空间对中心差分符号 i·sin(2πk/N)/h 做最小二乘求解；
        重建残差超过 tol·max|values| 时说明场不是离散闭的，返回 None

        Args:
            grid: 网格
            values: 形状 (*shape, d) 的节点值
            tol: 相对残差上界

        Returns:
            ClosedForm 或 None
        """
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape + (grid.dim,):
            raise InvalidInputError(f"余向量场形状 {values.shape} 与网格不符")
        harmonic = values.reshape(-1, grid.dim).mean(axis=0)
        freqs = np.meshgrid(*[np.fft.fftfreq(n) for n in grid.resolution], indexing="ij")
        symbols = [1j * np.sin(2 * np.pi * k) / h for k, h in zip(freqs, grid.spacing)]
        numerator = np.zeros(grid.shape, dtype=complex)
        denominator = np.zeros(grid.shape)
        for a, s in enumerate(symbols):
            numerator += np.conj(s) * np.fft.fftn(values[..., a] - harmonic[a])
            denominator += np.abs(s) ** 2
        solvable = denominator > 1e-12
        u_hat = np.where(solvable, numerator / np.where(solvable, denominator, 1.0), 0.0)
        potential = np.real(np.fft.ifftn(u_hat))
        form = cls.build(grid, harmonic, potential)
        residual = float(np.max(np.abs(form.values - values)))
        scale = max(1.0, float(np.max(np.abs(values))))
        if residual > tol * scale:
            logger.info(f"节点值不是离散闭形式（重建残差 {residual:.3e}）")
            return None
        return form

    def period(self, winding: Sequence[float]) -> float:
        """沿同调类为 winding 的闭路的积分"""
        return float(self.harmonic @ np.asarray(winding, dtype=float))

    def minus_exact(self, u: np.ndarray) -> "ClosedForm":
        """φ − D(u)"""
        return ClosedForm.build(self.grid, self.harmonic, self.potential - u)

    def __add__(self, other):
        if isinstance(other, ClosedForm):
            return ClosedForm.build(self.grid, self.harmonic + other.harmonic, self.potential + other.potential)
        return super().__add__(other)

    def __sub__(self, other):
        if isinstance(other, ClosedForm):
            return ClosedForm.build(self.grid, self.harmonic - other.harmonic, self.potential - other.potential)
        return super().__sub__(other)

    def __neg__(self) -> "ClosedForm":
        return ClosedForm.build(self.grid, -self.harmonic, -self.potential)

    def __mul__(self, scalar: float) -> "ClosedForm":
        return ClosedForm.build(self.grid, float(scalar) * self.harmonic, float(scalar) * self.potential)

    __rmul__ = __mul__
