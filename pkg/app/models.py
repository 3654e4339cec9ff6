"""
数据模型定义
所有 JSON 文档（输入表单、报告、HTTP 请求）都由这里的 pydantic 模型描述
"""
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from .errors import InvalidInputError
from .geometry.comass import ComassEstimate, ComassMethod
from .geometry.multilinear import AltForm, MetricPoint


class ReportModel(BaseModel):
    """报告基类：字段 passed 序列化为 "pass" """
    model_config = ConfigDict(populate_by_name=True)

    def to_json_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True)


# ==================== 外代数输入 ====================

class FormTerm(BaseModel):
    """单项 c·e*_idx"""
    idx: List[int] = Field(..., description="1 起的严格递增指标")
    c: float = Field(..., description="系数")


class AltFormPayload(BaseModel):
    """交错形式 JSON：{"n","p","terms":[{"idx","c"}]}"""
    n: int = Field(..., ge=2, le=8, description="环境维数")
    p: int = Field(..., ge=0, description="次数")
    terms: List[FormTerm] = Field(default_factory=list, description="非零项")

    def to_form(self) -> AltForm:
        return AltForm.from_terms(self.n, self.p, [(t.idx, t.c) for t in self.terms])


class MetricPayload(BaseModel):
    """度量 JSON：{"n","entries"}"""
    n: int = Field(..., ge=1, le=8, description="维数")
    entries: List[List[float]] = Field(..., description="n×n 对称正定矩阵")

    def to_metric(self) -> MetricPoint:
        point = MetricPoint(self.entries)
        if point.n != self.n:
            raise InvalidInputError(f"度量矩阵维数 {point.n} 与声明 n={self.n} 不符")
        return point


class ComassMode(str, Enum):
    """comass 求解方式"""
    AUTO = "auto"
    EXACT = "exact"
    ASCENT = "ascent"
    BRUTEFORCE = "bruteforce"


class ComassEstimatePayload(BaseModel):
    """comass 区间估计"""
    lower: float
    upper: float
    method: ComassMethod
    witness: List[List[float]] = Field(..., description="见证标架的列向量")
    evals: int = Field(..., description="形式求值次数")

    @classmethod
    def from_estimate(cls, est: ComassEstimate) -> "ComassEstimatePayload":
        return cls(
            lower=est.lower,
            upper=est.upper,
            method=est.method,
            witness=est.witness.columns(),
            evals=est.evaluations,
        )


class ComassRequest(BaseModel):
    """comass 计算请求"""
    form: AltFormPayload
    metric: Optional[MetricPayload] = Field(default=None, description="缺省为标准内积")
    method: ComassMode = Field(default=ComassMode.AUTO, description="求解方式")
    samples: int = Field(default=20000, ge=1, le=1_000_000, description="随机采样数")
    starts: int = Field(default=32, ge=1, le=1024, description="上升起点数")
    seed: int = Field(default=0, ge=0, description="随机种子")
    tol: float = Field(default=1e-9, gt=0, description="上升收敛容差")


# ==================== 引理套件 ====================

class SuiteResult(ReportModel):
    """单个引理套件的结果"""
    suite: str
    trials: int
    passed: bool = Field(..., alias="pass")
    worst_margin: float = Field(..., description="最坏情形下距离阈值的余量（≥ 0 为通过）")
    tolerance: float
    failures: List[Dict[str, Any]] = Field(default_factory=list)
    details: Dict[str, Any] = Field(default_factory=dict)


class LemmaReport(ReportModel):
    seed: int
    suites: List[SuiteResult]
    passed: bool = Field(..., alias="pass")


class LemmaRequest(BaseModel):
    """引理套件请求"""
    suite: str = Field(default="all", description="套件名或 all")
    trials: Optional[int] = Field(default=None, ge=1, le=5000, description="试验次数")
    seed: int = Field(default=0, ge=0, description="随机种子")


# ==================== 标定对认证 ====================

class CertificationReport(ReportModel):
    """网格上的标定对认证报告"""
    d_phi_max: float = Field(..., description="离散 dΦ 最大残差")
    comass_max: float = Field(..., description="全网格 comass 最大值")
    comass_on_M: float = Field(..., description="曲线样本上偏离 1 最远的 comass 值")
    comass_on_M_min: float
    comass_on_M_max: float
    equality_locus_hausdorff_cells: Optional[float] = Field(..., description="等号集到 M 的 Hausdorff 距离（格距单位）")
    locus_allowance_cells: float
    period_max_deviation: Optional[float] = Field(default=None, description="与 M 同调的随机闭路上周期与 M 的最大偏差")
    tube_gradient_defect: Optional[float] = Field(default=None, description="管内 max||∇d| − 1|")
    passed: bool = Field(..., alias="pass")
    worst_node: Dict[str, Any] = Field(default_factory=dict)
    violations: List[str] = Field(default_factory=list)
    thresholds: Dict[str, float] = Field(default_factory=dict)
    alpha: Optional[float] = None
    epsilon: Optional[float] = None
    reach: Optional[float] = None
    profiles: Dict[str, Dict[str, Any]] = Field(default_factory=dict)
    psi_residual: Optional[float] = None
    closure_residual: Optional[float] = None
    resolution: Optional[int] = None


class SignCombination(ReportModel):
    signs: List[int]
    comass_max: float
    passed: bool = Field(..., alias="pass")


class MulticlassReport(ReportModel):
    """双圆 T³ 模型的多重标定报告"""
    combinations: List[SignCombination]
    on_curve: Dict[str, float] = Field(default_factory=dict, description="各形式在曲线样本上的 comass 最值")
    reversed_orientation_value: float
    margins: Dict[str, float] = Field(default_factory=dict, description="管外 comass 最大值")
    certifications: Dict[str, CertificationReport] = Field(default_factory=dict)
    alpha: float
    epsilons: Dict[str, float] = Field(default_factory=dict)
    separation: float
    d_phi_max: float
    violations: List[str] = Field(default_factory=list)
    passed: bool = Field(..., alias="pass")


# ==================== 质量试验 ====================

class LoopPayload(BaseModel):
    """PL 闭路：提升坐标顶点"""
    vertices: List[List[float]]
    winding: List[int]
    weight: float = 1.0


class TrialViolation(BaseModel):
    competitor: int = Field(..., description="竞争者编号，-1 表示 M 本身")
    kind: str
    mass: float
    period: float
    excess: float = Field(..., description="超出 δ_grid 的量")
    loop: LoopPayload
    partners: List[LoopPayload] = Field(default_factory=list, description="多类试验中同组的其余闭路")


class StrictnessEntry(BaseModel):
    competitor: int
    defect: float
    margin: float


class TrialReport(ReportModel):
    """质量最小化试验报告"""
    mass_M: float
    period_M: float
    masses: List[float]
    periods_max_deviation: float
    min_margin: Optional[float]
    lower_bound_violations: List[TrialViolation] = Field(default_factory=list)
    max_calibration_ratio: float
    delta_grid: float
    competitors: int
    strictness: List[StrictnessEntry] = Field(default_factory=list)
    strictness_failures: int = 0
    extra: Dict[str, float] = Field(default_factory=dict, description="附加竞争者（如直线闭路）的质量")
    warnings: List[str] = Field(default_factory=list)
    passed: bool = Field(..., alias="pass")


# ==================== 运行报告 ====================

class RunReport(BaseModel):
    """命令输出信封"""
    command: str
    config: Dict[str, Any]
    input_hash: str
    report: Dict[str, Any]


class RunRequest(BaseModel):
    """forge / minimize 的 HTTP 请求，字段同 RunConfig"""
    model: Optional[str] = None
    resolution: Optional[int] = None
    amplitude: Optional[float] = None
    epsilon_factor: Optional[float] = None
    seed: Optional[int] = None
    competitors: Optional[int] = None
    complexity: Optional[int] = None
    competitor_amplitude: Optional[float] = None
    corrupt: Optional[str] = None
