"""
Comass 计算模块
‖φ‖*_g = max φ(ξ)/‖ξ‖_g（ξ 取遍单向量），提供精确公式、随机采样与 Stiefel 流形上的多起点上升三种引擎，
结果总是带有下界（见证标架）与上界（g-正交规范基下系数的 ℓ¹ 范数）
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from math import comb
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space, schur

from ..errors import ConvergenceError, InvalidInputError, UnsupportedComassError
from .multilinear import (
    AltForm,
    Frame,
    MetricPoint,
    evaluate,
    gram_norm,
    hodge_star,
    index_lookup,
    index_tuples,
    plucker_coordinates,
    pullback,
    random_frames,
)

logger = logging.getLogger(__name__)

MONOMIAL_TOL = 1e-14
BRUTEFORCE_CHUNK = 4096
ARMIJO_C = 1e-4
STALL_GRADIENT = 1e-6


class ComassMethod(str, Enum):
    """comass 引擎"""
    EXACT = "exact"
    ASCENT = "ascent"
    BRUTEFORCE = "bruteforce"


@dataclass(frozen=True)
class ComassEstimate:
    """comass 的区间估计：lower 由 witness 实现，upper 为证书"""
    lower: float
    upper: float
    method: ComassMethod
    witness: Frame
    evaluations: int

    @property
    def width(self) -> float:
        return self.upper - self.lower


# ==================== 公共工具 ====================

def _local_coefficients(phi: AltForm, g: Optional[MetricPoint]) -> Tuple[np.ndarray, AltForm]:
    """换到 g-正交规范坐标：返回 (E, E*φ)"""
    if g is None:
        g = MetricPoint.identity(phi.n)
    if g.n != phi.n:
        raise InvalidInputError(f"度量维数 {g.n} 与形式维数 {phi.n} 不一致")
    E = g.orthonormal_basis()
    return E, pullback(phi, E)


def comass_upper_bound(phi: AltForm, g: Optional[MetricPoint] = None) -> float:
    """ℓ¹ 证书：每个坐标形式的 comass 为 1，由三角不等式得上界"""
    _, local = _local_coefficients(phi, g)
    return float(np.sum(np.abs(local.coeffs)))


def _finish(
    phi: AltForm,
    g: MetricPoint,
    E: np.ndarray,
    local_frame: np.ndarray,
    orientation: int,
    upper: float,
    method: ComassMethod,
    evaluations: int,
) -> ComassEstimate:
    """把正交规范坐标下的见证标架映回原坐标，并由见证重新计算下界"""
    witness = Frame(E @ local_frame, orientation)
    value = evaluate(phi, witness) / gram_norm(witness, g)
    if value < 0:
        witness = witness.reversed()
        value = -value
    if method is ComassMethod.EXACT:
        upper = value
    return ComassEstimate(
        lower=float(value),
        upper=float(max(upper, value)),
        method=method,
        witness=witness,
        evaluations=int(evaluations),
    )


def _monomial(local: AltForm) -> Optional[int]:
    """若形式在正交规范基下只有一个非零系数，返回其位置"""
    scale = float(np.max(np.abs(local.coeffs))) if local.coeffs.size else 0.0
    if scale == 0.0:
        return 0
    support = np.flatnonzero(np.abs(local.coeffs) > MONOMIAL_TOL * scale)
    return int(support[0]) if support.size == 1 else None


# ==================== 精确引擎 ====================

def supports_exact(phi: AltForm, g: Optional[MetricPoint] = None) -> bool:
    if phi.p in {0, 1, 2, phi.n - 2, phi.n - 1, phi.n}:
        return True
    _, local = _local_coefficients(phi, g)
    return _monomial(local) is not None


def _exact_local(local: AltForm) -> Tuple[np.ndarray, int]:
    """
    正交规范坐标下的最大化平面

    Returns:
        (n×p 正交规范矩阵, 定向符号)
    """
    n, p = local.n, local.p
    a = local.coeffs

    if p == 0:
        return np.zeros((n, 0)), (-1 if a[0] < 0 else 1)

    position = _monomial(local)
    if position is not None:
        idx = list(index_tuples(n, p)[position])
        Y = np.eye(n)[:, idx]
        return Y, (-1 if a[position] < 0 else 1)

    if p == 1:
        return (a / np.linalg.norm(a))[:, None], 1

    if p == 2:
        A = np.zeros((n, n))
        for k, (i, j) in enumerate(index_tuples(n, 2)):
            A[i, j], A[j, i] = a[k], -a[k]
        T, Z = schur(A, output="real")
        best, best_pair = -1.0, (0, 1)
        for i in range(n - 1):
            coefficient = T[i, i + 1]
            if abs(coefficient) > best:
                best = abs(coefficient)
                best_pair = (i, i + 1) if coefficient >= 0 else (i + 1, i)
        return Z[:, list(best_pair)], 1

    if p in (n - 1, n - 2):
        starred = hodge_star(local, MetricPoint.identity(n))
        Y_star, orientation = _exact_local(starred)
        complement = null_space(Y_star.T)
        if complement.shape[1] != p:
            raise ConvergenceError("Hodge 对偶平面的正交补维数异常")
        return complement, 1

    raise UnsupportedComassError(n, p)


def comass_exact(phi: AltForm, g: Optional[MetricPoint] = None) -> ComassEstimate:
    """
    精确 comass

    支持 p ∈ {0, 1, 2, n−2, n−1, n}，以及在 g-正交规范基下为单项式的形式；
    其余次数抛出 UnsupportedComassError。
    """
    g = g or MetricPoint.identity(phi.n)
    E, local = _local_coefficients(phi, g)
    if not supports_exact(phi, g):
        raise UnsupportedComassError(phi.n, phi.p)
    Y, orientation = _exact_local(local)
    return _finish(phi, g, E, Y, orientation, 0.0, ComassMethod.EXACT, 1)


# ==================== 随机采样引擎 ====================

def _sample_chunk(local: AltForm, count: int, seed: np.random.SeedSequence) -> Tuple[float, np.ndarray]:
    rng = np.random.default_rng(seed)
    frames = random_frames(local.n, local.p, count, rng)
    values = plucker_coordinates(frames) @ local.coeffs
    k = int(np.argmax(np.abs(values)))
    Y = frames[k].copy()
    if values[k] < 0:
        Y[:, 0] *= -1.0
    return float(abs(values[k])), Y


def comass_bruteforce(
    phi: AltForm,
    g: Optional[MetricPoint] = None,
    samples: int = 100_000,
    seed: int = 0,
    workers: int = 1,
) -> ComassEstimate:
    """
    随机正交规范标架上取最大值

    Args:
        phi: 形式
        g: 度量，缺省为单位度量
        samples: 采样数
        seed: 随机种子；分块种子由 SeedSequence 派生，结果与线程数无关
        workers: 线程数
    """
    if samples < 1:
        raise InvalidInputError("samples 必须 ≥ 1")
    g = g or MetricPoint.identity(phi.n)
    E, local = _local_coefficients(phi, g)
    upper = float(np.sum(np.abs(local.coeffs)))

    if phi.p == 0:
        return _finish(phi, g, E, np.zeros((phi.n, 0)), 1, upper, ComassMethod.BRUTEFORCE, samples)

    sizes = [BRUTEFORCE_CHUNK] * (samples // BRUTEFORCE_CHUNK)
    if samples % BRUTEFORCE_CHUNK:
        sizes.append(samples % BRUTEFORCE_CHUNK)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lambda args: _sample_chunk(local, *args), zip(sizes, children)))

    best_value, best_frame = results[0]
    for value, frame in results[1:]:
        if value > best_value:
            best_value, best_frame = value, frame
    return _finish(phi, g, E, best_frame, 1, upper, ComassMethod.BRUTEFORCE, samples)


# ==================== Stiefel 上升引擎 ====================

def _euclidean_gradient(local: AltForm, Y: np.ndarray) -> np.ndarray:
    """∂f/∂Y：第 j 列为把 e_k 代入第 j 个位置得到的余向量"""
    n, p = Y.shape
    substituted = np.repeat(Y[None, None], n, axis=0).repeat(p, axis=1)  # (n, p, n, p)
    eye = np.eye(n)
    for j in range(p):
        substituted[:, j, :, j] = eye
    values = plucker_coordinates(substituted.reshape(n * p, n, p)) @ local.coeffs
    return values.reshape(n, p)


def _retract(Y: np.ndarray) -> np.ndarray:
    """QR 收缩，对角线取正"""
    Q, R = np.linalg.qr(Y)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


@dataclass(frozen=True)
class _AscentRun:
    value: float
    frame: np.ndarray
    converged: bool
    iterations: int
    evaluations: int


def _ascend(
    local: AltForm, seed: np.random.SeedSequence, tol: float, max_iter: int
) -> _AscentRun:
    n, p = local.n, local.p
    rng = np.random.default_rng(seed)
    Y = random_frames(n, p, 1, rng)[0]
    f = float(plucker_coordinates(Y) @ local.coeffs)
    if f < 0:
        Y[:, 0] *= -1.0
        f = -f
    evaluations, step = 1, 1.0

    for iteration in range(1, max_iter + 1):
        G = _euclidean_gradient(local, Y)
        evaluations += n * p
        YtG = Y.T @ G
        grad = G - Y @ (0.5 * (YtG + YtG.T))
        gnorm = float(np.linalg.norm(grad))
        if gnorm < tol:
            return _AscentRun(f, Y, True, iteration, evaluations)

        step = min(step * 2.0, 10.0)
        while True:
            candidate = _retract(Y + step * grad)
            f_new = float(plucker_coordinates(candidate) @ local.coeffs)
            evaluations += 1
            if f_new >= f + ARMIJO_C * step * gnorm ** 2:
                Y, f = candidate, f_new
                break
            step *= 0.5
            if step < 1e-16:
                # 已到浮点分辨率
                return _AscentRun(f, Y, gnorm < STALL_GRADIENT, iteration, evaluations)

    return _AscentRun(f, Y, False, max_iter, evaluations)


def _tie_key(frame: np.ndarray) -> Tuple[float, ...]:
    return tuple(np.round(plucker_coordinates(frame), 9).tolist())


def comass_ascent(
    phi: AltForm,
    g: Optional[MetricPoint] = None,
    starts: int = 32,
    tol: float = 1e-9,
    seed: int = 0,
    workers: int = 1,
    max_iter: int = 10_000,
) -> ComassEstimate:
    """
    多起点投影梯度上升

    在 g-正交规范坐标下于 Stiefel 流形上最大化 f(Y) = φ(Y)：
    Riemannian 梯度 G − Y·sym(YᵀG)，QR 收缩，回溯线搜索。
    单个起点不收敛只记录；全部失败时抛出 ConvergenceError。
    """
    if starts < 1:
        raise InvalidInputError("starts 必须 ≥ 1")
    if tol <= 0:
        raise InvalidInputError("tol 必须 > 0")
    g = g or MetricPoint.identity(phi.n)
    E, local = _local_coefficients(phi, g)
    upper = float(np.sum(np.abs(local.coeffs)))

    if phi.p == 0:
        return _finish(phi, g, E, np.zeros((phi.n, 0)), 1, upper, ComassMethod.ASCENT, 1)

    # 单位化后上升轨迹与形式（及度量）的整体缩放无关，tol 相对于 ‖E*φ‖₂
    norm = float(np.linalg.norm(local.coeffs))
    unit = local / norm if norm > 0 else local
    children = np.random.SeedSequence(seed).spawn(starts)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        runs: List[_AscentRun] = list(
            pool.map(lambda child: _ascend(unit, child, tol, max_iter), children)
        )

    failed = [k for k, run in enumerate(runs) if not run.converged]
    if failed:
        logger.info("comass_ascent: %d/%d 个起点未收敛 %s", len(failed), starts, failed)
    converged = [run for run in runs if run.converged]
    if not converged:
        raise ConvergenceError(f"comass_ascent: 全部 {starts} 个起点均未收敛")

    best_value = max(run.value for run in converged)
    ties = [run for run in converged if run.value >= best_value - 1e-12]
    best = min(ties, key=lambda run: _tie_key(run.frame))
    evaluations = sum(run.evaluations for run in runs)
    return _finish(phi, g, E, best.frame, 1, upper, ComassMethod.ASCENT, evaluations)


# ==================== 调度 ====================

def comass(
    phi: AltForm,
    g: Optional[MetricPoint] = None,
    starts: int = 32,
    samples: int = 20_000,
    seed: int = 0,
    workers: int = 1,
    tol: float = 1e-9,
) -> ComassEstimate:
    """
    comass 调度：支持时用精确公式，否则上升（32 起点）并以随机采样（2·10⁴）交叉校验，取更紧的区间
    """
    g = g or MetricPoint.identity(phi.n)
    if supports_exact(phi, g):
        return comass_exact(phi, g)

    ascent = comass_ascent(phi, g, starts=starts, tol=tol, seed=seed, workers=workers)
    sampled = comass_bruteforce(phi, g, samples=samples, seed=seed, workers=workers)
    best = ascent if ascent.lower >= sampled.lower else sampled
    if sampled.lower > ascent.lower + 1e-6:
        logger.warning(
            "随机采样下界 %.9f 超过上升结果 %.9f，上升可能陷入局部极大",
            sampled.lower, ascent.lower,
        )
    return ComassEstimate(
        lower=best.lower,
        upper=min(ascent.upper, sampled.upper),
        method=best.method,
        witness=best.witness,
        evaluations=ascent.evaluations + sampled.evaluations,
    )


# ==================== 网格上的一次形式 ====================

def covector_field_comass(values: np.ndarray, metric: np.ndarray) -> np.ndarray:
    """
    余向量场逐点 comass（次数 1 时精确）：√(Φᵀ G⁻¹ Φ)

    Args:
        values: 形状 (..., d)
        metric: 形状 (..., d, d)，或单个 (d, d)
    """
    values = np.asarray(values, dtype=float)
    metric = np.asarray(metric, dtype=float)
    if metric.ndim == 2:
        solved = np.linalg.solve(metric, values.reshape(-1, values.shape[-1]).T).T
        solved = solved.reshape(values.shape)
    else:
        solved = np.linalg.solve(metric, values[..., None])[..., 0]
    return np.sqrt(np.clip(np.einsum("...i,...i->...", values, solved), 0.0, None))


# ==================== 测试形式构造 ====================

def extend_form(psi: AltForm, n: int) -> AltForm:
    """把 R^m 上的形式按前 m 个坐标嵌入 R^n"""
    if n < psi.n:
        raise InvalidInputError("目标维数小于原维数")
    lookup = index_lookup(n, psi.p)
    coeffs = np.zeros(comb(n, psi.p))
    for idx, c in zip(index_tuples(psi.n, psi.p), psi.coeffs):
        coeffs[lookup[idx]] = c
    return AltForm(n, psi.p, coeffs)


def transversal_axis_form(J: Sequence[int], psi: AltForm) -> AltForm:
    """
    e*_J ∧ e*_{n+1} ∧ e*_{n+2} + ψ，ψ 只含 ≤ n 的指标

    Args:
        J: 1 起始、≤ n 的 p−2 个指标
        psi: R^n 上的 p 次形式
    """
    n = psi.n
    if len(J) != psi.p - 2 or any(not 1 <= j <= n for j in J):
        raise InvalidInputError(f"J={list(J)} 须为 {{1..{n}}} 中的 {psi.p - 2} 个指标")
    axis = AltForm.axis(n + 2, sorted(J) + [n + 1, n + 2])
    return axis + extend_form(psi, n + 2)
