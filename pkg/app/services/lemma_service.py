"""
逐点引理套件服务
对每个引理随机抽取实例，用精确 / 上升 comass 引擎数值验证其结论
"""
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import subspace_angles

from ..config import settings
from ..errors import DegenerateError, InvalidInputError
from ..geometry.comass import comass, comass_exact, transversal_axis_form
from ..geometry.metric_lab import (
    bundle_point_model,
    glue_metrics,
    gluing_bound,
    hl_decompose,
    hl_metric,
    minimal_hl_constant,
    scale_metric,
)
from ..geometry.multilinear import (
    AltForm,
    Frame,
    MetricPoint,
    canonical_frame,
    evaluate,
    gram_norm,
    index_tuples,
    random_form,
)
from ..models import LemmaReport, SuiteResult

logger = logging.getLogger(__name__)

# 一次检查：(名称, 观测值, 阈值)，观测值 ≤ 阈值为通过
Check = Tuple[str, float, float]

SCALES = (0.25, 1.0, 4.0, 10.0)
SCALING_STARTS = 4
SCALING_SAMPLES = 500
BUNDLE_ANGLES = 20
THETA_FLOOR = 0.1
MAX_FAILURES = 5


@dataclass(frozen=True)
class Suite:
    name: str
    runner: Callable[[np.random.SeedSequence], List[Check]]
    default_trials: int
    cap: Optional[int] = None
    fixed: bool = False


# ==================== 实例生成 ====================

def _exact_degree(rng: np.random.Generator, n: int) -> int:
    """精确引擎覆盖的次数 {1, 2, n−2, n−1}"""
    choices = sorted({p for p in (1, 2, n - 2, n - 1) if 1 <= p <= n - 1})
    return int(rng.choice(choices))


def _exact_instance(rng: np.random.Generator) -> Tuple[AltForm, MetricPoint]:
    n = int(rng.integers(2, 7))
    p = _exact_degree(rng, n)
    return random_form(n, p, rng), MetricPoint.random_spd(n, rng)


def _gaussian_frame(rng: np.random.Generator, n: int, p: int) -> Frame:
    while True:
        try:
            return Frame(rng.standard_normal((n, p)))
        except DegenerateError:
            continue


def _ratio(phi: AltForm, xi: Frame, g: MetricPoint) -> float:
    return evaluate(phi, xi) / gram_norm(xi, g)


def _nonflat_instance(
    rng: np.random.Generator, n: int, p: int
) -> Tuple[AltForm, Frame, MetricPoint, float]:
    """|θ| ≥ 0.1 的 (φ, ξ, g)，θ < 0 时反转 ξ"""
    g = MetricPoint.random_spd(n, rng)
    while True:
        phi = random_form(n, p, rng)
        xi = _gaussian_frame(rng, n, p)
        theta = _ratio(phi, xi, g)
        if abs(theta) >= THETA_FLOOR:
            break
    if theta < 0:
        xi = xi.reversed()
        theta = -theta
    return phi, xi, g, theta


def _comass_options(rng: np.random.Generator) -> Dict[str, int]:
    return {
        "starts": settings.COMASS_STARTS,
        "samples": settings.COMASS_SAMPLES,
        "seed": int(rng.integers(2 ** 31)),
    }


# ==================== 各引理 ====================

def _scaling(child: np.random.SeedSequence) -> List[Check]:
    """
    ‖φ‖*_{fg} = f^{−p/2}‖φ‖*_g

    精确次数用闭式解；R⁶ 中的一般 3 形式走上升，两个尺度共用同一组起点种子
    """
    rng = np.random.default_rng(child)
    phi, g = _exact_instance(rng)
    base = comass_exact(phi, g).lower
    worst = 0.0
    for f in SCALES:
        expected = f ** (-phi.p / 2.0) * base
        value = comass_exact(phi, scale_metric(g, f)).lower
        worst = max(worst, abs(value - expected) / expected)

    generic = random_form(6, 3, rng)
    h = MetricPoint.random_spd(6, rng)
    f = float(rng.choice(SCALES))
    options = {"starts": SCALING_STARTS, "samples": SCALING_SAMPLES, "seed": int(rng.integers(2 ** 31))}
    ascended = comass(generic, h, **options).lower
    rescaled = comass(generic, scale_metric(h, f), **options).lower
    ascent_error = abs(rescaled - f ** -1.5 * ascended) / ascended
    return [("relative_error", worst, 1e-8), ("ascent_relative_error", ascent_error, 1e-6)]


def _monotone(child: np.random.SeedSequence) -> List[Check]:
    """g′ ≥ g 时 ‖φ‖*_{g′} ≤ ‖φ‖*_g，逐个单向量比值不增且不超过 comass 上界"""
    rng = np.random.default_rng(child)
    phi, g = _exact_instance(rng)
    B = rng.standard_normal((phi.n, phi.n))
    bigger = MetricPoint(g.entries + 0.5 * B @ B.T / phi.n)
    small = comass(phi, g, **_comass_options(rng))
    large = comass(phi, bigger, **_comass_options(rng))
    witness = large.witness
    ratio_gap = _ratio(phi, witness, bigger) - _ratio(phi, witness, g)
    frames = [witness, small.witness] + [_gaussian_frame(rng, phi.n, phi.p) for _ in range(8)]
    overshoot = max(
        max(_ratio(phi, xi, g) - small.upper, _ratio(phi, xi, bigger) - large.upper)
        for xi in frames
    )
    return [
        ("comass_increase", large.lower - small.lower, 1e-9),
        ("witness_ratio_increase", ratio_gap, 1e-9),
        ("ratio_above_upper", overshoot, 1e-9),
    ]


def _gluing(child: np.random.SeedSequence) -> List[Check]:
    """a·g₁ + b·g₂ 的 comass 不超过 1/√(a^p/c₁² + b^p/c₂²)，g₁ = g₂ 时取等"""
    rng = np.random.default_rng(child)
    phi, g1 = _exact_instance(rng)
    g2 = MetricPoint.random_spd(phi.n, rng)
    a, b = rng.uniform(0.1, 3.0, 2)
    c1 = comass_exact(phi, g1).lower
    c2 = comass_exact(phi, g2).lower
    glued = comass_exact(phi, glue_metrics(a, g1, b, g2)).lower
    doubled = comass_exact(phi, glue_metrics(1.0, g1, 1.0, g1)).lower
    return [
        ("bound_excess", glued - gluing_bound(a, c1, b, c2, phi.p), 1e-8),
        ("equality_error", abs(doubled - 2.0 ** (-phi.p / 2.0) * c1) / c1, 1e-8),
    ]


def _bundle_grid() -> List[Check]:
    """θ 网格上 comass(π*ω/Πsinθ) ≥ 1，且仅当全部 θ = π/2 时取等"""
    angles = (np.arange(BUNDLE_ANGLES) + 1) * (np.pi / 2) / BUNDLE_ANGLES
    worst_low = 0.0
    worst_equal = 0.0
    worst_tangent = 0.0
    for triple in itertools.product(range(BUNDLE_ANGLES), repeat=3):
        model = bundle_point_model(angles[list(triple)], 3, 3)
        value = comass_exact(model.phi, model.g).lower
        worst_tangent = max(worst_tangent, abs(_ratio(model.phi, model.tangent_frame, model.g) - 1.0))
        if all(k == BUNDLE_ANGLES - 1 for k in triple):
            worst_equal = max(worst_equal, abs(value - 1.0))
        else:
            # 严格大于 1
            worst_low = max(worst_low, 1.0 + 1e-9 - value)
    return [
        ("below_one", worst_low, 0.0),
        ("equality_error", worst_equal, 1e-12),
        ("tangent_value_error", worst_tangent, 1e-12),
    ]


def _transversal(child: np.random.SeedSequence) -> List[Check]:
    """‖e*_J ∧ e*_{n+1} ∧ e*_{n+2} + ψ‖* = max{1, ‖ψ‖*}"""
    rng = np.random.default_rng(child)
    n = int(rng.choice([3, 4]))
    J = [int(rng.integers(1, n + 1))]
    psi = random_form(n, 3, rng)
    target = float(rng.uniform(0.3, 2.5))
    psi = psi * (target / comass_exact(psi).lower)
    phi = transversal_axis_form(J, psi)
    est = comass(phi, **_comass_options(rng))
    expected = max(1.0, target)
    return [
        ("lower_error", abs(est.lower - expected), 1e-3),
        ("upper_deficit", expected - est.upper, 1e-9),
    ]


def _axis_plus_tail(child: np.random.SeedSequence) -> List[Check]:
    """e*_{1..p} + Σ b_I e*_I（i_{p−1} > p）的 comass ≤ max{1, Σ|b_I|}"""
    rng = np.random.default_rng(child)
    n = int(rng.integers(4, 7))
    p = int(rng.integers(2, n - 1))
    allowed = [idx for idx in index_tuples(n, p) if idx[p - 2] >= p]
    chosen = [idx for idx in allowed if rng.random() < 0.5] or allowed[:1]
    b = rng.standard_normal(len(chosen))
    b *= rng.uniform(0.2, 3.0) / np.sum(np.abs(b))
    phi = AltForm.from_terms(
        n, p,
        [(list(range(1, p + 1)), 1.0)] + [([i + 1 for i in idx], float(c)) for idx, c in zip(chosen, b)],
    )
    est = comass(phi, **_comass_options(rng))
    return [("bound_excess", est.lower - max(1.0, float(np.sum(np.abs(b)))), 1e-6)]


def _canonical(child: np.random.SeedSequence) -> List[Check]:
    """典范标架重建 ξ/‖ξ‖，且 r + s − k = p"""
    rng = np.random.default_rng(child)
    n = int(rng.integers(2, 7))
    p = int(rng.integers(1, n + 1))
    r = int(rng.integers(1, n + 1))
    xi = _gaussian_frame(rng, n, p)
    V = _gaussian_frame(rng, n, r)
    g = MetricPoint.random_spd(n, rng)
    frame = canonical_frame(xi, V, g)
    expected = xi.simple_coordinates() / gram_norm(xi, g)
    error = float(np.max(np.abs(frame.reconstruct().simple_coordinates() - expected)))
    count_error = float(abs(frame.r + frame.s - frame.k - p))
    return [("reconstruction_error", error, 1e-9), ("count_mismatch", count_error, 0.0)]


def _decomposition(child: np.random.SeedSequence) -> List[Check]:
    """适配分解的系数模式与补空间唯一性"""
    rng = np.random.default_rng(child)
    n = int(rng.integers(3, 7))
    p = int(rng.integers(2, n))
    phi, xi, g, _ = _nonflat_instance(rng, n, p)
    first = hl_decompose(phi, xi, g)
    second = hl_decompose(phi, xi, g, complement=_gaussian_frame(rng, n, n - p))
    angle = float(np.max(subspace_angles(first.W.vectors, second.W.vectors)))
    return [
        ("pattern_violation", max(first.pattern_violation(), second.pattern_violation()), 1e-9),
        ("complement_angle", angle, 1e-8),
    ]


def _adapted_metric(child: np.random.SeedSequence) -> List[Check]:
    """C 可允许时 ⟨,⟩_V ⊕ C²⟨,⟩_W 下 comass(φ) = θ = φ(ξ)/‖ξ‖"""
    rng = np.random.default_rng(child)
    n = int(rng.integers(3, 7))
    p = _exact_degree(rng, n)
    phi, xi, g, theta = _nonflat_instance(rng, n, p)
    C = np.sqrt(1.5) * minimal_hl_constant(phi, xi, g)
    adapted = hl_metric(phi, xi, g, C)
    value = comass_exact(phi, adapted).lower
    return [
        ("comass_error", abs(value - theta), 1e-6),
        ("value_error", abs(_ratio(phi, xi, adapted) - theta), 1e-6),
    ]


SUITES: Dict[str, Suite] = {
    suite.name: suite
    for suite in (
        Suite("L3.1", _scaling, 500),
        Suite("L3.2", _monotone, 500),
        Suite("L3.3", _gluing, 500),
        Suite("L3.4", lambda _: _bundle_grid(), BUNDLE_ANGLES ** 3, fixed=True),
        Suite("L3.15", _transversal, 100, cap=100),
        Suite("L3.16", _axis_plus_tail, 100, cap=100),
        Suite("L3.17", _canonical, 1000),
        Suite("L4.1", _decomposition, 200),
        Suite("L4.2", _adapted_metric, 100, cap=100),
    )
}


class LemmaService:
    """引理套件服务类"""

    @classmethod
    def suite_names(cls) -> List[str]:
        return list(SUITES)

    @classmethod
    def run(
        cls,
        suite: str = "all",
        trials: Optional[int] = None,
        seed: int = 0,
        workers: int = 1,
    ) -> LemmaReport:
        """
        运行一个或全部套件

        Args:
            suite: 套件名或 all
            trials: 每个套件的试验次数，缺省用各自默认值；ascent 类套件最多 100 次
            seed: 随机种子；第 i 个套件使用 SeedSequence(seed).spawn(9)[i]
            workers: 线程数（不影响结果）

        Returns:
            LemmaReport
        """
        names = cls.suite_names()
        if suite != "all" and suite not in SUITES:
            raise InvalidInputError(f"未知套件 {suite}，可选: all, {', '.join(names)}")
        children = np.random.SeedSequence(seed).spawn(len(names))
        selected = names if suite == "all" else [suite]
        results = [
            cls._run_suite(SUITES[name], trials, children[names.index(name)], workers)
            for name in selected
        ]
        return LemmaReport(seed=seed, suites=results, passed=all(r.passed for r in results))

    @classmethod
    def _run_suite(
        cls,
        suite: Suite,
        trials: Optional[int],
        seed: np.random.SeedSequence,
        workers: int,
    ) -> SuiteResult:
        if suite.fixed:
            count = 1
        else:
            count = trials or suite.default_trials
            if suite.cap is not None and count > suite.cap:
                logger.info(f"{suite.name} 试验次数截断为 {suite.cap}")
                count = suite.cap
        logger.info(f"运行套件 {suite.name}（{count} 次）")

        seeds = seed.spawn(count)
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            outcomes = list(pool.map(suite.runner, seeds))
        return cls._summarize(suite, outcomes)

    @classmethod
    def _summarize(cls, suite: Suite, outcomes: Sequence[List[Check]]) -> SuiteResult:
        worst: Dict[str, float] = {}
        tolerances: Dict[str, float] = {}
        failures: List[Dict[str, object]] = []
        margin = np.inf
        for trial, checks in enumerate(outcomes):
            for name, value, tol in checks:
                worst[name] = max(worst.get(name, -np.inf), value)
                tolerances[name] = tol
                margin = min(margin, tol - value)
                if value > tol and len(failures) < MAX_FAILURES:
                    failures.append({"trial": trial, "check": name, "value": value, "tolerance": tol})

        trials = BUNDLE_ANGLES ** 3 if suite.fixed else len(outcomes)
        passed = bool(margin >= 0)
        if not passed:
            logger.warning(f"套件 {suite.name} 未通过，最坏余量 {margin:.3e}")
        return SuiteResult(
            suite=suite.name,
            trials=trials,
            passed=passed,
            worst_margin=float(margin),
            tolerance=max(tolerances.values()),
            failures=failures,
            details={"worst": worst, "tolerances": tolerances},
        )
