"""
截断函数
五次 smoothstep 过渡，断点处 C² 光滑
"""
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict

import numpy as np

from ..errors import InvalidInputError


class CutoffKind(str, Enum):
    RHO = "rho"
    SIGMA = "sigma"
    CHI = "chi"
    F_WEIGHT = "f_weight"


def smoothstep(x: np.ndarray) -> np.ndarray:
    """6x⁵ − 15x⁴ + 10x³，在 [0,1] 外截断"""
    x = np.clip(x, 0.0, 1.0)
    return x ** 3 * (x * (6.0 * x - 15.0) + 10.0)


@dataclass(frozen=True)
class CutoffProfile:
    """
    关于距离 d 的单调截断

    d ≤ start 取 plateau，d ≥ end 取 1（f_weight）或 0（其余）
    """
    kind: CutoffKind
    start: float
    end: float
    plateau: float = 1.0
    degree: int = 5

    def __post_init__(self):
        if not 0.0 <= self.start < self.end:
            raise InvalidInputError(f"截断断点非法：start={self.start}, end={self.end}")
        if self.kind == CutoffKind.F_WEIGHT and self.plateau < 1.0:
            raise InvalidInputError("f_weight 的平台值须 ≥ 1")

    @classmethod
    def rho(cls, epsilon: float) -> "CutoffProfile":
        return cls(CutoffKind.RHO, 0.6 * epsilon, 0.8 * epsilon)

    @classmethod
    def sigma(cls, epsilon: float) -> "CutoffProfile":
        return cls(CutoffKind.SIGMA, 0.6 * epsilon, epsilon)

    @classmethod
    def chi(cls, inner: float, outer: float) -> "CutoffProfile":
        return cls(CutoffKind.CHI, inner, outer)

    @classmethod
    def f_weight(cls, start: float, end: float, peak: float) -> "CutoffProfile":
        return cls(CutoffKind.F_WEIGHT, start, end, plateau=peak)

    def __call__(self, d: np.ndarray) -> np.ndarray:
        fall = 1.0 - smoothstep((np.asarray(d, dtype=float) - self.start) / (self.end - self.start))
        if self.kind == CutoffKind.F_WEIGHT:
            return 1.0 + (self.plateau - 1.0) * fall
        return self.plateau * fall

    def describe(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "start": self.start,
            "end": self.end,
            "plateau": self.plateau,
            "degree": self.degree,
        }
