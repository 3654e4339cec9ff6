"""
质量最小化试验
对与 M 同调的随机竞争闭路检验 mass(M) ≤ mass(T) + δ 以及标定下界 mass(T) ≥ ∮_T Φ − δ
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..errors import InvalidInputError
from ..forge.grid import MetricField
from ..models import StrictnessEntry, TrialReport, TrialViolation
from .loops import PLLoop, calibration_ratios, period_pairing, pl_mass, random_competitor

logger = logging.getLogger(__name__)

DELTA_GRID = 5e-3
REFERENCE_RESOLUTION = 256
CALIBRATION_RATIO_TOL = 2e-3
STRICT_DEFECT = 0.05
PERIOD_TOL = 1e-5


def delta_for_resolution(resolution: int) -> float:
    """δ_grid 与格距成正比，256 时为 5e-3"""
    return DELTA_GRID * REFERENCE_RESOLUTION / resolution


@dataclass(frozen=True)
class _Evaluation:
    loops: Tuple[PLLoop, ...]
    mass: float
    period: float
    ratio_max: float
    defect: float


def _evaluate(loops: Sequence[PLLoop], Phi, metric: MetricField) -> _Evaluation:
    ratios = np.concatenate([calibration_ratios(loop, Phi, metric).ravel() for loop in loops])
    return _Evaluation(
        loops=tuple(loops),
        mass=sum(pl_mass(loop, metric) for loop in loops),
        period=sum(period_pairing(loop, Phi) for loop in loops),
        ratio_max=float(ratios.max()),
        defect=float(1.0 - ratios.min()),
    )


def _violation(index: int, kind: str, ev: _Evaluation, excess: float) -> TrialViolation:
    return TrialViolation(
        competitor=index,
        kind=kind,
        mass=ev.mass,
        period=ev.period,
        excess=excess,
        loop=ev.loops[0].to_payload(),
        partners=[loop.to_payload() for loop in ev.loops[1:]],
    )


def run_trial(
    targets: Sequence[PLLoop],
    Phi,
    metric: MetricField,
    K: int,
    seed: int,
    complexity: int = 3,
    amplitude: float = 0.15,
    delta: Optional[float] = None,
    workers: int = 1,
    extra: Optional[Mapping[str, Sequence[PLLoop]]] = None,
) -> TrialReport:
    """
    通用试验：每个竞争者是与 targets 逐一同调的一组闭路，质量与周期按组求和

    Args:
        targets: 被认证的闭路（单类时只有 M）
        Phi: 可插值取样的闭形式（多类时为各形式之和）
        metric: 粘合后的度量 g̃
        K: 竞争者组数
        seed: 随机种子；第 i 组由 SeedSequence(seed).spawn(K)[i] 决定，与线程数无关
        complexity: Fourier 模数
        amplitude: 扰动幅度上界
        delta: δ_grid，缺省按网格分辨率
        workers: 线程数
        extra: 额外的命名竞争者（如直线闭路）
    """
    if K < 0:
        raise InvalidInputError("竞争者数量须非负")
    delta = delta if delta is not None else delta_for_resolution(min(metric.grid.resolution))
    warnings: List[str] = []
    violations: List[TrialViolation] = []

    reference = _evaluate(targets, Phi, metric)
    if reference.mass < reference.period - delta:
        violations.append(_violation(-1, "lower_bound", reference, reference.period - delta - reference.mass))

    children = np.random.SeedSequence(seed).spawn(K)

    def _competitor(i: int) -> _Evaluation:
        grand = children[i].spawn(len(targets))
        loops = [
            random_competitor(target.winding, grand[j], complexity, amplitude)
            for j, target in enumerate(targets)
        ]
        return _evaluate(loops, Phi, metric)

    if K == 0:
        warnings.append("竞争者数量为 0，试验平凡通过")
        logger.warning(warnings[-1])
        results: List[_Evaluation] = []
    else:
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            results = list(pool.map(_competitor, range(K)))

    masses: List[float] = []
    strictness: List[StrictnessEntry] = []
    strict_failures = 0
    deviation = 0.0
    ratio_max = reference.ratio_max
    for i, ev in enumerate(results):
        masses.append(ev.mass)
        margin = ev.mass - reference.mass
        drift = abs(ev.period - reference.period)
        deviation = max(deviation, drift)
        ratio_max = max(ratio_max, ev.ratio_max)
        if drift > PERIOD_TOL:
            violations.append(_violation(i, "period", ev, drift))
        if margin < -delta:
            violations.append(_violation(i, "mass", ev, -delta - margin))
        if ev.mass < ev.period - delta:
            violations.append(_violation(i, "lower_bound", ev, ev.period - delta - ev.mass))
        if ev.defect > STRICT_DEFECT:
            strictness.append(StrictnessEntry(competitor=i, defect=ev.defect, margin=margin))
            if margin <= 0:
                strict_failures += 1

    extra_masses = {}
    for j, (name, loops) in enumerate(sorted((extra or {}).items())):
        ev = _evaluate(loops, Phi, metric)
        extra_masses[name] = ev.mass
        ratio_max = max(ratio_max, ev.ratio_max)
        drift = abs(ev.period - reference.period)
        deviation = max(deviation, drift)
        if drift > PERIOD_TOL:
            violations.append(_violation(K + j, f"period:{name}", ev, drift))
        if ev.mass < ev.period - delta:
            violations.append(_violation(K + j, f"lower_bound:{name}", ev, ev.period - delta - ev.mass))
        if ev.mass - reference.mass < -delta:
            violations.append(_violation(K + j, f"mass:{name}", ev, reference.mass - delta - ev.mass))

    if ratio_max > 1.0 + CALIBRATION_RATIO_TOL:
        warnings.append(f"逐点标定比 {ratio_max:.6f} 超过 1 + {CALIBRATION_RATIO_TOL}")
    if violations:
        logger.warning(f"试验发现 {len(violations)} 处违例")

    margins = [m - reference.mass for m in masses]
    return TrialReport(
        mass_M=reference.mass,
        period_M=reference.period,
        masses=masses,
        periods_max_deviation=deviation,
        min_margin=min(margins) if margins else None,
        lower_bound_violations=violations,
        max_calibration_ratio=ratio_max,
        delta_grid=delta,
        competitors=K,
        strictness=strictness,
        strictness_failures=strict_failures,
        extra=extra_masses,
        warnings=warnings,
        passed=not violations and strict_failures == 0 and ratio_max <= 1.0 + CALIBRATION_RATIO_TOL,
    )


def minimization_trial(
    M: PLLoop,
    Phi,
    metric: MetricField,
    K: int,
    seed: int,
    **options,
) -> TrialReport:
    """单个同调类的试验"""
    return run_trial([M], Phi, metric, K, seed, **options)


def multiclass_trial(
    M1: PLLoop,
    M2: PLLoop,
    Phi_sum,
    metric: MetricField,
    K: int,
    seed: int,
    **options,
) -> TrialReport:
    """两类之和：mass(M₁) + mass(M₂) ≤ mass(T₁) + mass(T₂) + δ"""
    return run_trial([M1, M2], Phi_sum, metric, K, seed, **options)
