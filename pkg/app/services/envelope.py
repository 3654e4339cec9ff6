"""
命令输出信封
"""
import hashlib
import json
from typing import Any, Mapping, Optional

from ..models import RunReport


def input_hash(command: str, inputs: Mapping[str, Any]) -> str:
    """命令名与全部输入的规范 JSON（键排序、紧凑分隔符）的 SHA-256"""
    canonical = json.dumps({"command": command, "inputs": inputs}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def wrap(
    command: str,
    config: Mapping[str, Any],
    report: Mapping[str, Any],
    inputs: Optional[Mapping[str, Any]] = None,
) -> RunReport:
    """
    Args:
        command: 命令名
        config: 解析后的运行配置
        report: 报告正文
        inputs: 配置之外的输入（表单、度量、读入的场文件配置），一并计入哈希
    """
    hashed = {"config": dict(config), **dict(inputs or {})}
    return RunReport(
        command=command,
        config=dict(config),
        input_hash=input_hash(command, hashed),
        report=dict(report),
    )
