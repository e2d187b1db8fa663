"""
检查点容器

布局：8 字节魔数 b"MJCKPT01" | uint64 LE 头长度 | JSON 头 | 原始小端张量负载。
JSON 头包含模型配置、元数据与张量清单（名称、维度、dtype、负载内偏移、字节数）。
不写入时间戳，同样的内容得到逐字节相同的文件。
"""

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from mjollnir.core.exceptions import FormatError
from mjollnir.core.nn.backbone import ModelConfig, ModelParams, init_params
from mjollnir.infrastructure.monitoring.logging import get_logger

logger = get_logger(__name__)

MAGIC = b"MJCKPT01"
FORMAT_NAME = "mjollnir-checkpoint"
FORMAT_VERSION = 1
_LENGTH = struct.Struct("<Q")
_DTYPES = {"float32": "<f4", "float64": "<f8"}

PathLike = Union[str, Path]


@dataclass
class OptimizerSnapshot:
    """优化器状态快照（按参数名存放一阶/二阶矩）"""

    t: int
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]


@dataclass
class Checkpoint:
    config: ModelConfig
    params: ModelParams
    optimizer: Optional[OptimizerSnapshot] = None
    metadata: Dict[str, Any] = field(default_factory=dict)


def _entries(params: ModelParams, optimizer: Optional[OptimizerSnapshot]) -> List[Tuple[str, np.ndarray]]:
    entries = [(f"param/{name}", t.values) for name, t in params.named_tensors()]
    if optimizer is not None:
        for name, _ in params.named_tensors():
            entries.append((f"adam_m/{name}", optimizer.m[name]))
            entries.append((f"adam_v/{name}", optimizer.v[name]))
    return entries


def save_checkpoint(
    path: PathLike,
    config: ModelConfig,
    params: ModelParams,
    optimizer: Optional[OptimizerSnapshot] = None,
    metadata: Optional[Dict[str, Any]] = None,
) -> Path:
    """写出检查点（先写临时文件再原子替换）"""
    path = Path(path)
    manifest = []
    payload = bytearray()
    for name, values in _entries(params, optimizer):
        dtype_name = str(values.dtype)
        if dtype_name not in _DTYPES:
            raise FormatError(f"不支持的张量精度 {dtype_name}: {name}", path=str(path))
        raw = np.ascontiguousarray(values, dtype=_DTYPES[dtype_name]).tobytes()
        manifest.append({
            "name": name,
            "dims": list(values.shape),
            "dtype": dtype_name,
            "offset": len(payload),
            "nbytes": len(raw),
        })
        payload += raw

    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "config": config.model_dump(mode="json"),
        "optimizer": None if optimizer is None else {"t": int(optimizer.t)},
        "metadata": metadata or {},
        "tensors": manifest,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")

    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_LENGTH.pack(len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload)
    os.replace(tmp, path)
    logger.debug("检查点已写出", extra={"path": str(path), "tensors": len(manifest), "bytes": len(payload)})
    return path


def read_header(path: PathLike) -> Tuple[Dict[str, Any], int]:
    """读取并校验头部，返回 (header, 负载起始偏移)"""
    path = Path(path)
    with open(path, "rb") as fh:
        prefix = fh.read(len(MAGIC) + _LENGTH.size)
        if len(prefix) < len(MAGIC) or prefix[:len(MAGIC)] != MAGIC:
            raise FormatError("检查点魔数不匹配", offset=0, path=str(path))
        if len(prefix) < len(MAGIC) + _LENGTH.size:
            raise FormatError("检查点头长度字段被截断", offset=len(MAGIC), path=str(path))
        (length,) = _LENGTH.unpack(prefix[len(MAGIC):])
        raw = fh.read(length)
    start = len(MAGIC) + _LENGTH.size
    if len(raw) != length:
        raise FormatError(f"检查点头被截断：声明 {length} 字节，实际 {len(raw)}", offset=start, path=str(path))
    try:
        header = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"检查点头不是合法 JSON: {e}", offset=start, path=str(path)) from e
    if header.get("format") != FORMAT_NAME or header.get("version") != FORMAT_VERSION:
        raise FormatError(
            f"检查点格式/版本不受支持: {header.get('format')} v{header.get('version')}",
            offset=start, path=str(path),
        )
    return header, start + length


def load_checkpoint(path: PathLike) -> Checkpoint:
    """读取检查点并按名称还原参数与优化器状态"""
    path = Path(path)
    header, payload_start = read_header(path)
    config = ModelConfig.model_validate(header["config"])
    with open(path, "rb") as fh:
        fh.seek(payload_start)
        payload = fh.read()

    arrays: Dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        offset, nbytes = int(entry["offset"]), int(entry["nbytes"])
        if offset + nbytes > len(payload):
            raise FormatError(
                f"张量 {entry['name']} 负载被截断",
                offset=payload_start + offset, path=str(path),
            )
        dtype = np.dtype(_DTYPES[entry["dtype"]])
        arr = np.frombuffer(payload, dtype=dtype, count=nbytes // dtype.itemsize, offset=offset)
        arrays[entry["name"]] = arr.reshape(entry["dims"]).astype(entry["dtype"])

    first = next(iter(arrays.values()), None)
    dtype = np.float32 if first is None else first.dtype
    params = init_params(config, seed=0, dtype=dtype)
    for name, tensor in params.named_tensors():
        key = f"param/{name}"
        if key not in arrays:
            raise FormatError(f"检查点缺少参数 {name}", path=str(path))
        if arrays[key].shape != tensor.dims:
            raise FormatError(f"参数 {name} 形状不符: {arrays[key].shape} != {tensor.dims}", path=str(path))
        tensor.values = arrays[key]

    optimizer = None
    if header.get("optimizer") is not None:
        names = [name for name, _ in params.named_tensors()]
        try:
            optimizer = OptimizerSnapshot(
                t=int(header["optimizer"]["t"]),
                m={n: arrays[f"adam_m/{n}"] for n in names},
                v={n: arrays[f"adam_v/{n}"] for n in names},
            )
        except KeyError as e:
            raise FormatError(f"检查点缺少优化器矩: {e}", path=str(path)) from e

    return Checkpoint(config=config, params=params, optimizer=optimizer, metadata=header.get("metadata", {}))
