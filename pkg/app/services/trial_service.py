"""
质量最小化试验服务
读取（或现场锻造）标定对，对随机竞争闭路执行质量比较
"""
import logging
from typing import Any, Dict, List, Mapping, Tuple

import numpy as np
from pydantic import ValidationError

from ..config import Corruption, ForgeModel, RunConfig
from ..court.loops import PLLoop, pl_mass
from ..court.trials import run_trial
from ..errors import ArtifactError, InvalidInputError
from ..forge.dumps import load_fields
from ..forge.grid import ClosedForm, CovectorField, MetricField, TorusGrid
from ..models import RunReport, TrialReport
from .envelope import wrap
from .forge_service import STRAIGHT_BASE, STRAIGHT_CLASS, ForgeOutcome, ForgeService

logger = logging.getLogger(__name__)

METRIC_CORRUPTION = 0.81
STRAIGHT_VERTICES = 256


class TrialService:
    """试验服务类"""

    @staticmethod
    def _form(grid: TorusGrid, values: np.ndarray) -> CovectorField:
        """场文件只存节点值：离散闭时恢复调和部分与势函数，否则按一般余向量场处理"""
        closed = ClosedForm.from_values(grid, values)
        if closed is None:
            logger.warning("场文件中的 Φ 不是离散闭形式，周期按求积计算")
            return CovectorField(grid, values)
        return closed

    @classmethod
    def load_artifact(cls, path: str) -> Tuple[RunConfig, ForgeOutcome, Dict[str, Any]]:
        """
        从场文件还原锻造产物

        Returns:
            (写出时的运行配置, 产物, 旁挂文件中的原始配置)
        """
        grid, fields, meta = load_fields(path)
        try:
            forged = RunConfig(**meta)
        except ValidationError as e:
            raise ArtifactError(f"场文件 {path} 的配置无效: {e}") from e
        names = ("Phi1", "Phi2", "metric") if forged.model is ForgeModel.TWOCIRCLE3D else ("Phi", "metric")
        missing = [name for name in names if name not in fields]
        if missing:
            raise ArtifactError(f"场文件 {path} 缺少场 {missing}")
        if forged.model is ForgeModel.TWOCIRCLE3D:
            Phi = cls._form(grid, fields["Phi1"]) + cls._form(grid, fields["Phi2"])
        else:
            Phi = cls._form(grid, fields["Phi"])
        metric = MetricField(grid, fields["metric"])
        curves = ForgeService.build_curves(forged)
        # 场文件不带认证报告，按已通过处理
        outcome = ForgeOutcome(forged.model, grid, curves, Phi, metric, report=None, fields=fields)
        return forged, outcome, meta

    @classmethod
    def run(cls, config: RunConfig) -> Tuple[RunReport, bool]:
        """
        minimize 命令

        Args:
            config: 运行配置；给出 fields 时读取场文件，否则现场锻造

        Returns:
            (信封, 是否通过)
        """
        warnings = []
        inputs: Dict[str, Any] = {}
        if config.fields:
            forged, outcome, meta = cls.load_artifact(config.fields)
            inputs["artifact"] = meta
            if forged.model is not config.model:
                logger.info(f"以场文件中的模型 {forged.model.value} 为准（配置为 {config.model.value}）")
        else:
            outcome = ForgeService.forge(config)
            if not outcome.passed:
                warnings.append("锻造认证未通过，试验结果仅供参考")

        metric = outcome.metric
        if config.corrupt is Corruption.METRIC:
            logger.warning(f"负对照：度量整体乘以 {METRIC_CORRUPTION}")
            metric = metric.scaled(METRIC_CORRUPTION)

        report = cls.trial(outcome, metric, config)
        if warnings:
            report = report.model_copy(update={"warnings": report.warnings + warnings})
        envelope = wrap("minimize", config.public(), report.to_json_dict(), inputs)
        return envelope, report.passed

    @classmethod
    def trial(cls, outcome: ForgeOutcome, metric: MetricField, config: RunConfig) -> TrialReport:
        targets = [PLLoop.from_curve(curve) for curve in outcome.curves]
        extra: Dict[str, List[PLLoop]] = {}
        flat: Mapping[str, float] = {}
        if outcome.grid.dim == 2:
            straight = PLLoop.straight(STRAIGHT_BASE, STRAIGHT_CLASS, STRAIGHT_VERTICES)
            extra["straight"] = [straight]
            reference = MetricField.flat(outcome.grid)
            flat = {
                "flat_length_M": pl_mass(targets[0], reference),
                "flat_length_straight": pl_mass(straight, reference),
            }
        elif len(targets) != 2:
            raise InvalidInputError("T³ 试验需要两条曲线")

        report = run_trial(
            targets,
            outcome.Phi,
            metric,
            config.competitors,
            config.seed,
            complexity=config.complexity,
            amplitude=config.competitor_amplitude,
            workers=config.workers,
            extra=extra,
        )
        if flat:
            report = report.model_copy(update={"extra": {**report.extra, **flat}})
        return report
