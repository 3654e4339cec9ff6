"""
异常定义
所有数值模块抛出的错误都继承自 CalibError，CLI 与路由据此映射退出码 / HTTP 状态码
"""
from typing import Optional, Sequence


class CalibError(Exception):
    """标定工具包基础异常"""


class InvalidInputError(CalibError, ValueError):
    """参数错误：维数、次数不匹配或取值越界"""


class DegenerateError(InvalidInputError):
    """退化输入：标架线性相关、θ ≈ 0 等"""


class UnsupportedComassError(CalibError):
    """精确 comass 引擎不支持该次数（绝不静默回退）"""

    def __init__(self, n: int, p: int):
        super().__init__(f"comass_exact 不支持 n={n}, p={p} 的形式")
        self.n = n
        self.p = p


class ConvergenceError(CalibError):
    """迭代不收敛：所有上升起点失败，或 Newton 投影在管状邻域内失败"""

    def __init__(self, message: str, nodes: Optional[Sequence] = None):
        super().__init__(message)
        self.nodes = list(nodes or [])


class AdmissibilityError(CalibError):
    """常数低于可允许阈值（hl_metric 的 C、glue_metric 的 α）"""

    def __init__(self, message: str, minimal: float, node: Optional[Sequence] = None):
        super().__init__(f"{message}（最小可允许值 {minimal:.6g}）")
        self.minimal = float(minimal)
        self.node = None if node is None else [float(x) for x in node]


class TubeOverlapError(CalibError):
    """两个管状邻域相交"""


class PeriodError(CalibError):
    """周期假设不成立：原函数积分回路不闭合"""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message}（闭合残差 {residual:.3e}）")
        self.residual = float(residual)


class ArtifactError(CalibError):
    """场文件缺失或无法读取"""
