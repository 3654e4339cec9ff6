"""
场文件读写
二进制主文件为小端 float64 的顺序拼接，旁挂 JSON 记录维数、各场的分量数与字节偏移以及运行配置
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np

from ..errors import ArtifactError
from .grid import TorusGrid

logger = logging.getLogger(__name__)

DTYPE = np.dtype("<f8")


def sidecar_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def dump_fields(
    path: Union[str, Path],
    grid: TorusGrid,
    fields: Mapping[str, np.ndarray],
    config: Mapping[str, Any],
) -> Path:
    """
    写出场文件

    Args:
        path: 二进制文件路径（旁挂文件为 path + ".json"）
        grid: 网格
        fields: 名称 → 形状 (*shape, ...) 的节点数组
        config: 运行配置，原样写入旁挂文件

    Returns:
        旁挂文件路径
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    with path.open("wb") as fh:
        for name, values in fields.items():
            values = np.ascontiguousarray(values, dtype=DTYPE)
            if values.shape[:grid.dim] != grid.shape:
                raise ArtifactError(f"场 {name} 的形状 {values.shape} 与网格不符")
            components = int(np.prod(values.shape[grid.dim:], dtype=int))
            fh.write(values.tobytes(order="C"))
            entries.append({"name": name, "components": components, "offset": offset})
            offset += values.nbytes
    sidecar = sidecar_path(path)
    sidecar.write_text(
        json.dumps({"dims": list(grid.shape), "fields": entries, "config": dict(config)}, sort_keys=True, indent=2),
        encoding="utf-8",
    )
    logger.info(f"场文件已写出: {path}（{offset} 字节）")
    return sidecar


def load_fields(path: Union[str, Path]) -> Tuple[TorusGrid, Dict[str, np.ndarray], Dict[str, Any]]:
    """
    读取场文件

    Returns:
        (网格, 名称 → 数组, 运行配置)；多分量场按 (*dims, d) 或 (*dims, d, d) 还原
    """
    path = Path(path)
    sidecar = sidecar_path(path)
    if not path.is_file() or not sidecar.is_file():
        raise ArtifactError(f"找不到场文件 {path} 或其旁挂文件")
    try:
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        dims = tuple(int(n) for n in meta["dims"])
        raw = path.read_bytes()
        grid = TorusGrid(len(dims), dims)
        count = int(np.prod(dims))
        fields: Dict[str, np.ndarray] = {}
        for entry in meta["fields"]:
            components = int(entry["components"])
            data = np.frombuffer(raw, dtype=DTYPE, count=count * components, offset=int(entry["offset"]))
            if components == 1:
                shape = dims
            elif components == len(dims):
                shape = dims + (components,)
            else:
                side = int(round(np.sqrt(components)))
                shape = dims + (side, side)
            fields[entry["name"]] = data.reshape(shape).astype(float)
    except (KeyError, ValueError, TypeError) as e:
        raise ArtifactError(f"场文件 {path} 无法解析: {e}") from e
    return grid, fields, dict(meta.get("config", {}))
