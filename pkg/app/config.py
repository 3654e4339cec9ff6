"""
配置管理模块
进程级配置从环境变量 / .env 读取；单次运行配置按 默认值 < 环境变量 < 配置文件 < 命令行 的顺序解析
"""
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from dotenv import dotenv_values
from pydantic import Field
from pydantic_settings import BaseSettings

from .errors import InvalidInputError


class Settings(BaseSettings):
    """应用配置"""

    # 服务配置
    APP_NAME: str = "Calibration Forge API"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"

    # 并行线程数（结果与线程数无关）
    THREADS: int = os.cpu_count() or 1

    # comass 引擎默认参数
    COMASS_STARTS: int = 32
    COMASS_SAMPLES: int = 20000
    ASCENT_TOL: float = 1e-9
    ASCENT_MAX_ITER: int = 10000

    # 跨域配置
    CORS_ORIGINS: list = ["*"]

    class Config:
        env_file = ".env"
        case_sensitive = True


# 全局配置实例
settings = Settings()


# ==================== 运行配置 ====================

class ForgeModel(str, Enum):
    """环面模型"""
    STRAIGHT2D = "straight2d"
    WAVY2D = "wavy2d"
    TWOCIRCLE3D = "twocircle3d"


class Corruption(str, Enum):
    """负对照"""
    NONE = "none"
    RHO = "rho"
    METRIC = "metric"


DEFAULT_RESOLUTION = {
    ForgeModel.STRAIGHT2D: 256,
    ForgeModel.WAVY2D: 256,
    ForgeModel.TWOCIRCLE3D: 96,
}


class RunConfig(BaseSettings):
    """一次 forge / minimize / lemmas 运行的完整配置"""

    model: ForgeModel = Field(default=ForgeModel.WAVY2D, description="环面模型")
    resolution: Optional[int] = Field(default=None, ge=64, le=1024, description="每轴网格点数，缺省按模型取 256 / 96")
    amplitude: float = Field(default=0.1, ge=0.0, lt=0.25, description="wavy2d 的波动振幅")
    epsilon_factor: float = Field(default=0.8, gt=0.0, le=0.8, description="ε 与 reach 之比")
    curve_samples: int = Field(default=4096, ge=256, description="曲线样本数")
    seed: int = Field(default=0, ge=0, description="随机种子")
    competitors: int = Field(default=200, ge=0, description="竞争闭路数量")
    complexity: int = Field(default=3, ge=3, description="竞争闭路的 Fourier 模数")
    competitor_amplitude: float = Field(default=0.15, ge=0.0, description="竞争闭路扰动幅度上界")
    trials: Optional[int] = Field(default=None, ge=1, description="每个引理套件的试验次数")
    suite: str = Field(default="all", description="引理套件名")
    threads: Optional[int] = Field(default=None, ge=1, description="工作线程数")
    dump_fields: Optional[str] = Field(default=None, description="场文件输出路径")
    fields: Optional[str] = Field(default=None, description="minimize 读取的场文件路径")
    corrupt: Corruption = Field(default=Corruption.NONE, description="负对照开关")

    class Config:
        env_prefix = "CALIB_"
        case_sensitive = False
        extra = "forbid"

    @property
    def grid_resolution(self) -> int:
        return self.resolution or DEFAULT_RESOLUTION[self.model]

    @property
    def workers(self) -> int:
        return self.threads or settings.THREADS

    def public(self) -> Dict[str, Any]:
        """写入报告的配置：解析后的分辨率，不含线程数"""
        data = self.model_dump(mode="json", exclude={"threads"})
        data["resolution"] = self.grid_resolution
        return data

    @classmethod
    def resolve(
        cls,
        config_file: Optional[Union[str, Path]] = None,
        overrides: Optional[Mapping[str, Any]] = None,
    ) -> "RunConfig":
        """
        合并配置来源

        Args:
            config_file: key=value 文本配置（键不区分大小写，- 与 _ 等价）
            overrides: 命令行显式给出的参数（值为 None 的项忽略）
        """
        values: Dict[str, Any] = {}
        if config_file is not None:
            values.update(read_config_file(config_file))
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls(**values)


def read_config_file(path: Union[str, Path]) -> Dict[str, str]:
    """读取 key=value 配置文件，未知键视为用法错误"""
    path = Path(path)
    if not path.is_file():
        raise InvalidInputError(f"配置文件不存在: {path}")
    known = set(RunConfig.model_fields)
    parsed: Dict[str, str] = {}
    for raw_key, value in dotenv_values(path).items():
        key = raw_key.strip().lower().replace("-", "_")
        if key not in known:
            raise InvalidInputError(f"配置文件含未知键: {raw_key}")
        if value is not None:
            parsed[key] = value.strip()
    return parsed
