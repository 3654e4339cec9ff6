"""
标定对锻造服务
按运行配置构造环面模型，执行 构造 → 粘合 → 认证，并可写出场文件
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from ..config import Corruption, ForgeModel, RunConfig
from ..errors import InvalidInputError
from ..forge.curves import SubmanifoldCurve, straight_circle, wavy_circle
from ..forge.dumps import dump_fields
from ..forge.forge import forge_single
from ..forge.grid import ClosedForm, CovectorField, MetricField, TorusGrid
from ..forge.multiclass import forge_multiclass, two_circle_model
from ..models import CertificationReport, MulticlassReport, RunReport
from .envelope import wrap

logger = logging.getLogger(__name__)

STRAIGHT_BASE = (0.0, 0.5)
STRAIGHT_CLASS = (1, 0)


@dataclass(frozen=True, eq=False)
class ForgeOutcome:
    """一次锻造的产物：曲线、形式（多类时为各形式之和）、度量与报告"""
    model: ForgeModel
    grid: TorusGrid
    curves: List[SubmanifoldCurve]
    Phi: CovectorField
    metric: MetricField
    report: Optional[Union[CertificationReport, MulticlassReport]]
    fields: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.report is None or self.report.passed


class ForgeService:
    """锻造服务类"""

    @classmethod
    def build_curves(cls, config: RunConfig) -> List[SubmanifoldCurve]:
        """模型对应的子流形"""
        if config.model is ForgeModel.STRAIGHT2D:
            return [straight_circle(STRAIGHT_BASE, STRAIGHT_CLASS, config.curve_samples, name="M")]
        if config.model is ForgeModel.WAVY2D:
            return [wavy_circle(config.amplitude, config.curve_samples)]
        return list(two_circle_model(config.curve_samples))

    @classmethod
    def grid_for(cls, config: RunConfig) -> TorusGrid:
        dim = 3 if config.model is ForgeModel.TWOCIRCLE3D else 2
        return TorusGrid.cubic(dim, config.grid_resolution)

    @classmethod
    def forge(cls, config: RunConfig) -> ForgeOutcome:
        """
        执行锻造

        Args:
            config: 解析后的运行配置

        Returns:
            ForgeOutcome
        """
        grid = cls.grid_for(config)
        curves = cls.build_curves(config)
        logger.info(f"锻造 {config.model.value}：网格 {grid.shape}")

        if config.model is ForgeModel.TWOCIRCLE3D:
            if config.corrupt is Corruption.RHO:
                raise InvalidInputError("负对照 rho 只适用于单曲线模型")
            result = forge_multiclass(grid, curves[0], curves[1], config.epsilon_factor)
            Phi = result.Phi1 + result.Phi2
            outcome = ForgeOutcome(config.model, grid, curves, Phi, result.metric, result.report, result.fields)
        else:
            phi = ClosedForm.build(grid, STRAIGHT_CLASS)
            result = forge_single(
                curves[0], phi, grid, config.epsilon_factor,
                corrupt_rho=config.corrupt is Corruption.RHO,
            )
            outcome = ForgeOutcome(config.model, grid, curves, result.Phi, result.metric, result.report, result.fields)

        if not outcome.passed:
            logger.warning(f"认证未通过: {outcome.report.violations[:3]}")
        return outcome

    @classmethod
    def run(cls, config: RunConfig) -> Tuple[RunReport, bool]:
        """forge 命令：锻造、按需写出场文件、包装报告"""
        outcome = cls.forge(config)
        if config.dump_fields:
            dump_fields(config.dump_fields, outcome.grid, outcome.fields, config.public())
        envelope = wrap("forge", config.public(), outcome.report.to_json_dict())
        return envelope, outcome.passed
