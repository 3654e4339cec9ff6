"""
多重线性代数模块
有限维实内积空间上的外代数：交错形式、标架、求值、Hodge 对偶、单向量的典范分解

约定：
- 多重指标在内部为 0 起始的严格递增元组，按字典序稠密存储 C(n, p) 个系数；
- 对外（JSON / 构造函数 from_terms、axis）使用 1 起始指标；
- 标架显式携带定向符号，单向量 ξ = orientation · v₁∧…∧v_p。
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from math import comb
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DegenerateError, InvalidInputError

logger = logging.getLogger(__name__)

MAX_DIM = 8
COEFF_TOL = 1e-12
SYMMETRY_TOL = 1e-12
DEGENERATE_TOL = 1e-10
ANGLE_CUTOFF = 1e-9


# ==================== 多重指标表 ====================

@lru_cache(maxsize=None)
def index_tuples(n: int, p: int) -> Tuple[Tuple[int, ...], ...]:
    """{0..n-1} 的全部 p 元递增子集（字典序）"""
    return tuple(combinations(range(n), p))


@lru_cache(maxsize=None)
def index_lookup(n: int, p: int) -> Dict[Tuple[int, ...], int]:
    return {idx: k for k, idx in enumerate(index_tuples(n, p))}


@lru_cache(maxsize=None)
def index_array(n: int, p: int) -> np.ndarray:
    arr = np.array(index_tuples(n, p), dtype=np.intp).reshape(comb(n, p), p)
    arr.setflags(write=False)
    return arr


def permutation_sign(seq: Sequence[int]) -> int:
    """排列的符号（逆序数奇偶），seq 元素须互异"""
    inversions = 0
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                inversions += 1
    return -1 if inversions % 2 else 1


@lru_cache(maxsize=None)
def _wedge_table(n: int, p: int, q: int) -> Tuple[np.ndarray, np.ndarray]:
    """e*_I ∧ e*_J 的目标指标与符号表；不相交时目标为 -1"""
    lookup = index_lookup(n, p + q)
    left, right = index_tuples(n, p), index_tuples(n, q)
    target = np.full((len(left), len(right)), -1, dtype=np.intp)
    sign = np.zeros((len(left), len(right)))
    for a, I in enumerate(left):
        for b, J in enumerate(right):
            if set(I) & set(J):
                continue
            target[a, b] = lookup[tuple(sorted(I + J))]
            sign[a, b] = permutation_sign(I + J)
    return target, sign


@lru_cache(maxsize=None)
def _complement_table(n: int, p: int) -> Tuple[np.ndarray, np.ndarray]:
    """Hodge 星在标准正交定向基下的置换：e*_I ↦ sign(I, Iᶜ) e*_{Iᶜ}"""
    lookup = index_lookup(n, n - p)
    tuples = index_tuples(n, p)
    target = np.empty(len(tuples), dtype=np.intp)
    sign = np.empty(len(tuples))
    for a, I in enumerate(tuples):
        complement = tuple(k for k in range(n) if k not in I)
        target[a] = lookup[complement]
        sign[a] = permutation_sign(I + complement)
    return target, sign


def plucker_coordinates(vectors: np.ndarray) -> np.ndarray:
    """
    计算 p 个向量张成的单向量在 e_I 基下的坐标（所有 p×p 子式）

    Args:
        vectors: 形状 (n, p) 或批量 (m, n, p)

    Returns:
        形状 (C(n,p),) 或 (m, C(n,p))
    """
    arr = np.asarray(vectors, dtype=float)
    batched = arr.ndim == 3
    if not batched:
        arr = arr[None]
    m, n, p = arr.shape
    if p == 0:
        out = np.ones((m, 1))
    else:
        rows = index_array(n, p)
        out = np.linalg.det(arr[:, rows, :])
    return out if batched else out[0]


def compound_matrix(A: np.ndarray, p: int) -> np.ndarray:
    """p 阶复合矩阵 C_p(A)[I, J] = det A[I, J]"""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if p == 0:
        return np.ones((1, 1))
    idx = index_array(n, p)
    blocks = A[idx[:, None, :, None], idx[None, :, None, :]]
    return np.linalg.det(blocks)


# ==================== 交错形式 ====================

@dataclass(frozen=True, eq=False)
class AltForm:
    """n 维空间上的 p 次交错形式，系数按字典序稠密存储"""
    n: int
    p: int
    coeffs: np.ndarray

    def __post_init__(self):
        if not 2 <= self.n <= MAX_DIM:
            raise InvalidInputError(f"环境维数 n={self.n} 超出 [2, {MAX_DIM}]")
        if not 0 <= self.p <= self.n:
            raise InvalidInputError(f"次数 p={self.p} 超出 [0, {self.n}]")
        coeffs = np.array(self.coeffs, dtype=float).reshape(-1)
        if coeffs.shape != (comb(self.n, self.p),):
            raise InvalidInputError(
                f"系数个数 {coeffs.size} 与 C({self.n},{self.p}) 不符"
            )
        if not np.all(np.isfinite(coeffs)):
            raise InvalidInputError("系数必须全部有限")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    # ---------- 构造 ----------

    @classmethod
    def zero(cls, n: int, p: int) -> "AltForm":
        return cls(n, p, np.zeros(comb(n, p)))

    @classmethod
    def from_terms(
        cls, n: int, p: int, terms: Iterable[Tuple[Sequence[int], float]]
    ) -> "AltForm":
        """
        由 (1 起始严格递增指标, 系数) 列表构造；重复指标累加

        Args:
            n: 环境维数
            p: 次数
            terms: 指标与系数对
        """
        if not 0 <= p <= n:
            raise InvalidInputError(f"次数 p={p} 超出 [0, {n}]")
        coeffs = np.zeros(comb(n, p))
        lookup = index_lookup(n, p)
        for idx, c in terms:
            idx = tuple(int(i) for i in idx)
            if len(idx) != p:
                raise InvalidInputError(f"指标 {list(idx)} 的长度不等于次数 {p}")
            if any(b <= a for a, b in zip(idx, idx[1:])):
                raise InvalidInputError(f"指标 {list(idx)} 不是严格递增的")
            if idx and not (1 <= idx[0] and idx[-1] <= n):
                raise InvalidInputError(f"指标 {list(idx)} 超出 1..{n}")
            coeffs[lookup[tuple(i - 1 for i in idx)]] += float(c)
        return cls(n, p, coeffs)

    @classmethod
    def axis(cls, n: int, idx: Sequence[int], c: float = 1.0) -> "AltForm":
        """坐标形式 c·e*_I（1 起始指标）"""
        return cls.from_terms(n, len(idx), [(idx, c)])

    # ---------- 访问 ----------

    def coefficient(self, idx: Sequence[int]) -> float:
        """1 起始指标的系数"""
        return float(self.coeffs[index_lookup(self.n, self.p)[tuple(i - 1 for i in idx)]])

    def terms(self, tol: float = 0.0) -> List[Tuple[Tuple[int, ...], float]]:
        """非零项列表（1 起始指标）"""
        return [
            (tuple(i + 1 for i in idx), float(c))
            for idx, c in zip(index_tuples(self.n, self.p), self.coeffs)
            if abs(c) > tol
        ]

    def is_zero(self, tol: float = COEFF_TOL) -> bool:
        return bool(np.all(np.abs(self.coeffs) <= tol))

    # ---------- 算术 ----------

    def _check_same_space(self, other: "AltForm"):
        if not isinstance(other, AltForm):
            raise InvalidInputError("只能与 AltForm 运算")
        if (self.n, self.p) != (other.n, other.p):
            raise InvalidInputError(
                f"形式空间不一致: ({self.n},{self.p}) vs ({other.n},{other.p})"
            )

    def __add__(self, other: "AltForm") -> "AltForm":
        self._check_same_space(other)
        return AltForm(self.n, self.p, self.coeffs + other.coeffs)

    def __sub__(self, other: "AltForm") -> "AltForm":
        self._check_same_space(other)
        return AltForm(self.n, self.p, self.coeffs - other.coeffs)

    def __neg__(self) -> "AltForm":
        return AltForm(self.n, self.p, -self.coeffs)

    def __mul__(self, scalar: float) -> "AltForm":
        return AltForm(self.n, self.p, float(scalar) * self.coeffs)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "AltForm":
        return AltForm(self.n, self.p, self.coeffs / float(scalar))

    def __eq__(self, other) -> bool:
        if not isinstance(other, AltForm):
            return NotImplemented
        return (self.n, self.p) == (other.n, other.p) and bool(
            np.all(np.abs(self.coeffs - other.coeffs) <= COEFF_TOL)
        )

    def __repr__(self) -> str:
        body = " + ".join(f"{c:g}·e*{list(idx)}" for idx, c in self.terms()) or "0"
        return f"AltForm(n={self.n}, p={self.p}: {body})"


# ==================== 标架 ====================

@dataclass(frozen=True, eq=False)
class Frame:
    """p 个线性无关向量（列）与定向符号"""
    vectors: np.ndarray
    orientation: int = 1
    strict: bool = field(default=True, repr=False)

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=float)
        if vectors.ndim == 1:
            vectors = vectors[:, None]
        if vectors.ndim != 2:
            raise InvalidInputError("标架向量必须是 (n, p) 矩阵")
        n, p = vectors.shape
        if not 1 <= n <= MAX_DIM or p > n:
            raise InvalidInputError(f"标架形状 ({n}, {p}) 非法")
        if not np.all(np.isfinite(vectors)):
            raise InvalidInputError("标架向量必须全部有限")
        if self.orientation not in (1, -1):
            raise InvalidInputError("定向符号必须是 ±1")
        if self.strict and p > 0:
            norms = np.linalg.norm(vectors, axis=0)
            if np.any(norms <= DEGENERATE_TOL):
                raise DegenerateError("标架含零向量")
            smallest = np.linalg.svd(vectors / norms, compute_uv=False)[-1]
            if smallest <= DEGENERATE_TOL:
                raise DegenerateError(f"标架线性相关（最小奇异值 {smallest:.2e}）")
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def count(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def from_columns(cls, *columns: Sequence[float], orientation: int = 1) -> "Frame":
        return cls(np.column_stack(columns), orientation)

    @classmethod
    def standard(cls, n: int, idx: Sequence[int]) -> "Frame":
        """坐标标架 (e_{i₁}, …, e_{i_p})（1 起始指标）"""
        eye = np.eye(n)
        return cls(eye[:, [i - 1 for i in idx]].reshape(n, len(idx)))

    def permuted(self, order: Sequence[int]) -> "Frame":
        """重排向量；定向乘以排列符号，因此单向量不变"""
        order = list(order)
        if sorted(order) != list(range(self.count)):
            raise InvalidInputError(f"{order} 不是 0..{self.count - 1} 的排列")
        return Frame(
            self.vectors[:, order],
            self.orientation * permutation_sign(order),
            self.strict,
        )

    def reversed(self) -> "Frame":
        return Frame(self.vectors, -self.orientation, self.strict)

    def concat(self, other: "Frame") -> "Frame":
        """先本标架、后 other 的拼接标架（"先标架块、后补空间"约定）"""
        if other.n != self.n:
            raise InvalidInputError("拼接的标架维数不一致")
        return Frame(
            np.hstack([self.vectors, other.vectors]),
            self.orientation * other.orientation,
        )

    def simple_coordinates(self) -> np.ndarray:
        """单向量 ξ 在 e_I 基下的 Plücker 坐标"""
        return self.orientation * plucker_coordinates(self.vectors)

    def columns(self) -> List[List[float]]:
        return self.vectors.T.tolist()


# ==================== 度量 ====================

@dataclass(frozen=True, eq=False)
class MetricPoint:
    """一点处的对称正定双线性形式"""
    entries: np.ndarray

    def __post_init__(self):
        G = np.array(self.entries, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1] or not 1 <= G.shape[0] <= MAX_DIM:
            raise InvalidInputError(f"度量矩阵形状 {G.shape} 非法")
        if not np.all(np.isfinite(G)):
            raise InvalidInputError("度量矩阵必须全部有限")
        scale = max(1.0, float(np.max(np.abs(G))))
        if np.max(np.abs(G - G.T)) > SYMMETRY_TOL * scale:
            raise InvalidInputError("度量矩阵不对称")
        G = 0.5 * (G + G.T)
        smallest = float(np.linalg.eigvalsh(G)[0])
        if smallest <= DEGENERATE_TOL:
            raise InvalidInputError(f"度量矩阵不正定（最小特征值 {smallest:.2e}）")
        G.setflags(write=False)
        object.__setattr__(self, "entries", G)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, n: int) -> "MetricPoint":
        return cls(np.eye(n))

    @classmethod
    def diagonal(cls, values: Sequence[float]) -> "MetricPoint":
        return cls(np.diag(np.asarray(values, dtype=float)))

    @classmethod
    def random_spd(cls, n: int, seed, spread: float = 1.0) -> "MetricPoint":
        """随机 SPD 度量：A Aᵀ/n + (0.1 + spread)·I 的随机旋转版本"""
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((n, n))
        return cls(A @ A.T / n + (0.1 + spread * rng.random()) * np.eye(n))

    def scaled(self, f: float) -> "MetricPoint":
        return MetricPoint(float(f) * self.entries)

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.asarray(u) @ self.entries @ np.asarray(v))

    def orthonormal_basis(self) -> np.ndarray:
        """E（列为 g-正交规范基）满足 EᵀGE = I 且 det E > 0"""
        L = np.linalg.cholesky(self.entries)
        return np.linalg.inv(L).T


# ==================== 运算 ====================

def wedge(a: AltForm, b: AltForm) -> AltForm:
    """外积 a ∧ b"""
    if a.n != b.n:
        raise InvalidInputError(f"外积两侧维数不一致: {a.n} vs {b.n}")
    if a.p + b.p > a.n:
        raise InvalidInputError(f"次数之和 {a.p + b.p} 超过维数 {a.n}")
    target, sign = _wedge_table(a.n, a.p, b.p)
    products = sign * np.outer(a.coeffs, b.coeffs)
    mask = target >= 0
    out = np.zeros(comb(a.n, a.p + b.p))
    np.add.at(out, target[mask], products[mask])
    return AltForm(a.n, a.p + b.p, out)


def evaluate(phi: AltForm, xi: Frame) -> float:
    """
    形式在单向量上的取值 φ(ξ)：对标架的行列式展开

    Args:
        phi: p 次形式
        xi: p 向量标架

    Returns:
        标量 φ(ξ)
    """
    if xi.n != phi.n:
        raise InvalidInputError(f"标架维数 {xi.n} 与形式维数 {phi.n} 不一致")
    if xi.count != phi.p:
        raise InvalidInputError(f"标架向量数 {xi.count} 与形式次数 {phi.p} 不一致")
    return float(xi.simple_coordinates() @ phi.coeffs)


def gram_norm(xi: Frame, g: MetricPoint) -> float:
    """
    √det(VᵀGV)：标架张成平行体的 g-体积

    退化标架（≤ 1e-10）照常返回并记录警告。
    """
    if xi.n != g.n:
        raise InvalidInputError(f"标架维数 {xi.n} 与度量维数 {g.n} 不一致")
    if xi.count == 0:
        return 1.0
    V = xi.vectors
    value = float(np.sqrt(max(np.linalg.det(V.T @ g.entries @ V), 0.0)))
    if value <= DEGENERATE_TOL:
        logger.warning("退化标架: gram_norm = %.3e", value)
    return value


def pullback(phi: AltForm, A: np.ndarray) -> AltForm:
    """
    拉回 A*φ：(A*φ)(v₁,…,v_p) = φ(Av₁,…,Av_p)

    系数为 C_p(A)ᵀ a，用于换到 g-正交规范坐标。
    """
    A = np.asarray(A, dtype=float)
    if A.shape != (phi.n, phi.n):
        raise InvalidInputError(f"拉回矩阵形状 {A.shape} 与维数 {phi.n} 不符")
    return AltForm(phi.n, phi.p, compound_matrix(A, phi.p).T @ phi.coeffs)


def _oriented_basis(g: MetricPoint, orientation: Optional[Frame]) -> np.ndarray:
    E = g.orthonormal_basis()
    if orientation is None:
        return E
    if orientation.n != g.n or orientation.count != g.n:
        raise InvalidInputError("定向必须是完整的 n 标架")
    sign = orientation.orientation * np.sign(np.linalg.det(orientation.vectors))
    if sign < 0:
        E = E.copy()
        E[:, 0] *= -1.0
    return E


def hodge_star(
    phi: AltForm, g: MetricPoint, orientation: Optional[Frame] = None
) -> AltForm:
    """
    Hodge 星算子 ⋆φ

    Args:
        phi: p 次形式
        g: 度量
        orientation: 完整 n 标架给出的定向，缺省为标准定向

    Returns:
        (n-p) 次形式，满足 ⋆⋆φ = (-1)^{p(n-p)} φ
    """
    if g.n != phi.n:
        raise InvalidInputError("度量与形式维数不一致")
    E = _oriented_basis(g, orientation)
    local = pullback(phi, E).coeffs
    target, sign = _complement_table(phi.n, phi.p)
    starred = np.zeros(comb(phi.n, phi.n - phi.p))
    starred[target] = sign * local
    return pullback(AltForm(phi.n, phi.n - phi.p, starred), np.linalg.inv(E))


# ==================== 典范分解 ====================

@dataclass(frozen=True)
class CanonicalFrame:
    """单向量相对子空间 V 的典范形式"""
    angles: np.ndarray
    f_vectors: np.ndarray
    g_vectors: np.ndarray
    orientation: int

    @property
    def k(self) -> int:
        return len(self.angles)

    @property
    def r(self) -> int:
        return self.f_vectors.shape[1]

    @property
    def s(self) -> int:
        return self.g_vectors.shape[1]

    @property
    def eigenvalues(self) -> np.ndarray:
        """B(u,v) = ⟨π(u), π(v)⟩ 在角度块上的特征值 cos²θⱼ"""
        return np.cos(self.angles) ** 2

    def reconstruct(self) -> Frame:
        """(cosθⱼ fⱼ + sinθⱼ gⱼ)、其余 f、其余 g 组成的标架"""
        k = self.k
        tilted = np.cos(self.angles) * self.f_vectors[:, :k] + np.sin(self.angles) * self.g_vectors[:, :k]
        columns = np.hstack([tilted, self.f_vectors[:, k:], self.g_vectors[:, k:]])
        return Frame(columns, self.orientation)


def _positive_leading(v: np.ndarray) -> float:
    return -1.0 if v[np.argmax(np.abs(v))] < 0 else 1.0


def canonical_frame(xi: Frame, V: Frame, g: MetricPoint) -> CanonicalFrame:
    """
    单向量 ξ 相对子空间 span(V) 的典范分解

    在 g-正交规范坐标下对 V 的正交投影限制到 span(ξ) 做奇异值分解：
    奇异值为 cosθⱼ，θ 在 1e-9 以内贴近 0 或 π/2 的方向分别归入纯 f / 纯 g 块。

    Args:
        xi: 单向量的标架
        V: 子空间的标架（任意基）
        g: 度量

    Returns:
        CanonicalFrame，向量以原坐标给出
    """
    if not (xi.n == V.n == g.n):
        raise InvalidInputError("ξ、V、g 的维数不一致")
    E = g.orthonormal_basis()
    E_inv = np.linalg.inv(E)
    X = E_inv @ xi.vectors
    p = X.shape[1]

    Qx, Rx = np.linalg.qr(X)
    Qv, _ = np.linalg.qr(E_inv @ V.vectors)
    U, S, Wt = np.linalg.svd(Qv.T @ Qx)
    cosines = np.zeros(p)
    cosines[: len(S)] = np.clip(S, 0.0, 1.0)

    tilted_f, tilted_g, angles, pure_f, pure_g = [], [], [], [], []
    for j in range(p):
        u = Qx @ Wt[j]
        if j < len(S) and cosines[j] > 0.0:
            f = Qv @ U[:, j]
            perp = u - cosines[j] * f
        else:
            f, perp = None, u
        sine = float(np.linalg.norm(perp))
        theta = float(np.arctan2(sine, cosines[j]))
        if theta <= ANGLE_CUTOFF:
            pure_f.append(u * _positive_leading(u))
        elif theta >= np.pi / 2 - ANGLE_CUTOFF:
            pure_g.append(u * _positive_leading(u))
        else:
            gv = perp / sine
            flip = _positive_leading(f)
            tilted_f.append(flip * f)
            tilted_g.append(flip * gv)
            angles.append(theta)

    n = xi.n
    f_cols = np.array(tilted_f + pure_f, dtype=float).reshape(-1, n).T
    g_cols = np.array(tilted_g + pure_g, dtype=float).reshape(-1, n).T
    angles_arr = np.array(angles, dtype=float)

    # 重建标架与 ξ 的相对定向
    k = len(angles)
    rebuilt = np.hstack([
        np.cos(angles_arr) * f_cols[:, :k] + np.sin(angles_arr) * g_cols[:, :k],
        f_cols[:, k:],
        g_cols[:, k:],
    ])
    relative = np.sign(np.linalg.det(Qx.T @ rebuilt)) * np.sign(np.linalg.det(Rx)) if p else 1.0
    orientation = int(xi.orientation * (relative if relative != 0 else 1.0))

    return CanonicalFrame(
        angles=angles_arr,
        f_vectors=E @ f_cols if f_cols.size else np.zeros((n, 0)),
        g_vectors=E @ g_cols if g_cols.size else np.zeros((n, 0)),
        orientation=orientation,
    )


# ==================== 随机采样 ====================

def random_frames(n: int, p: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """批量 Gaussian 矩阵 QR 正交化（对角线取正），形状 (count, n, p)"""
    A = rng.standard_normal((count, n, p))
    Q, R = np.linalg.qr(A)
    signs = np.sign(np.diagonal(R, axis1=1, axis2=2))
    signs[signs == 0] = 1.0
    return Q * signs[:, None, :]


def random_frame(n: int, p: int, seed) -> Frame:
    """
    单位度量下正交规范的随机标架，同一 seed 输出相同

    Args:
        n: 环境维数
        p: 向量个数，1 ≤ p ≤ n
        seed: 随机种子
    """
    if not 1 <= p <= n:
        raise InvalidInputError(f"需要 1 ≤ p ≤ n，得到 p={p}, n={n}")
    rng = np.random.default_rng(seed)
    return Frame(random_frames(n, p, 1, rng)[0])


def random_form(n: int, p: int, seed, scale: float = 1.0) -> AltForm:
    """Gaussian 系数的随机形式"""
    rng = np.random.default_rng(seed)
    return AltForm(n, p, scale * rng.standard_normal(comb(n, p)))
