"""
MGRID 容器读写

布局：
    6 字节魔数 b"MGRID1"
    uint64 LE 头长度
    UTF-8 JSON 头（magic, version, grid, height, width, channels, target, dates）
    每天一段 little-endian float32 负载：预报因子 C 个平面、目标、掩码，顺序与头一致
"""

import json
import os
import struct
import threading
from datetime import date
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from mjollnir.core.data.grid import GridSample, GridSpec
from mjollnir.core.exceptions import DataError, DimensionError, FormatError
from mjollnir.infrastructure.monitoring.logging import get_logger

logger = get_logger(__name__)

MAGIC = b"MGRID1"
VERSION = 1
_LENGTH = struct.Struct("<Q")
_FLOAT = np.dtype("<f4")

PathLike = Union[str, Path]
Channel = Tuple[str, str]


class MgridWriter:
    """
    流式写出 MGRID 文件。日期在构造时给定（需严格递增），
    之后按同样顺序逐天调用 write_day。
    """

    def __init__(
        self,
        path: PathLike,
        grid: GridSpec,
        channels: Sequence[Channel],
        dates: Sequence[date],
        target: Channel = ("flash_density", "flashes km-2 yr-1"),
    ):
        self.path = Path(path)
        self.grid = grid
        self.channels = [(str(n), str(u)) for n, u in channels]
        self.dates = list(dates)
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise DataError("MGRID 日期必须严格递增且不重复")
        self._written = 0
        self._sanitized = 0
        header = {
            "magic": MAGIC.decode("ascii"),
            "version": VERSION,
            "grid": grid.model_dump(mode="json"),
            "height": grid.height,
            "width": grid.width,
            "channels": [{"name": n, "unit": u} for n, u in self.channels],
            "target": {"name": target[0], "unit": target[1]},
            "dates": [d.isoformat() for d in self.dates],
        }
        header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._tmp = self.path.with_name(self.path.name + ".tmp")
        self._fh = open(self._tmp, "wb")
        self._fh.write(MAGIC)
        self._fh.write(_LENGTH.pack(len(header_bytes)))
        self._fh.write(header_bytes)

    def write_day(self, predictors: np.ndarray, target: np.ndarray, mask: Optional[np.ndarray] = None) -> None:
        """写入下一天；非有限值存为 0 并把该像素掩码置 0"""
        if self._written >= len(self.dates):
            raise DataError("写入天数超过头中声明的日期数")
        H, W = self.grid.dims
        C = len(self.channels)
        predictors = np.asarray(predictors, dtype=np.float64)
        target = np.asarray(target, dtype=np.float64)
        if predictors.shape != (C, H, W):
            raise DimensionError("预报因子形状不符", axis="predictors", expected=(C, H, W), actual=predictors.shape)
        if target.shape != (H, W):
            raise DimensionError("目标形状不符", axis="target", expected=(H, W), actual=target.shape)
        mask = np.ones((H, W)) if mask is None else np.asarray(mask, dtype=np.float64)
        if mask.shape != (H, W):
            raise DimensionError("掩码形状不符", axis="mask", expected=(H, W), actual=mask.shape)

        bad = ~np.isfinite(predictors).all(axis=0) | ~np.isfinite(target) | ~np.isfinite(mask)
        self._sanitized += int(np.count_nonzero(bad & (mask > 0)))
        block = np.empty((C + 2, H, W), dtype=_FLOAT)
        block[:C] = np.where(np.isfinite(predictors), predictors, 0.0)
        block[C] = np.where(np.isfinite(target), target, 0.0)
        block[C + 1] = np.where(bad, 0.0, (mask > 0).astype(np.float64))
        self._fh.write(block.tobytes())
        self._written += 1

    def write_sample(self, sample: GridSample) -> None:
        expected = self.dates[self._written] if self._written < len(self.dates) else None
        if sample.date != expected:
            raise DataError(f"样本日期 {sample.date} 与头中第 {self._written} 个日期 {expected} 不符")
        self.write_day(sample.predictors, sample.target, sample.mask)

    def close(self) -> Path:
        self._fh.close()
        if self._written != len(self.dates):
            os.remove(self._tmp)
            raise DataError(f"只写入 {self._written} 天，头中声明 {len(self.dates)} 天")
        os.replace(self._tmp, self.path)
        if self._sanitized:
            logger.warning("非有限值已置零并屏蔽", extra={"path": str(self.path), "pixels": self._sanitized})
        return self.path

    def __enter__(self) -> "MgridWriter":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.close()
        else:
            self._fh.close()
            if self._tmp.exists():
                os.remove(self._tmp)


def write_dataset(
    path: PathLike,
    samples: Iterable[GridSample],
    grid: GridSpec,
    channels: Sequence[Channel],
    target: Channel = ("flash_density", "flashes km-2 yr-1"),
) -> Path:
    """把一组样本按日期排序后写成 MGRID 文件"""
    ordered = sorted(samples, key=lambda s: s.date)
    with MgridWriter(path, grid, channels, [s.date for s in ordered], target=target) as writer:
        for sample in ordered:
            writer.write_sample(sample)
    return Path(path)


def read_header(path: PathLike) -> Tuple[Dict[str, Any], int]:
    """读取并校验头部，返回 (header, 负载起始偏移)"""
    path = Path(path)
    prefix_len = len(MAGIC) + _LENGTH.size
    with open(path, "rb") as fh:
        prefix = fh.read(prefix_len)
        if prefix[:len(MAGIC)] != MAGIC:
            raise FormatError("MGRID 魔数不匹配", offset=0, path=str(path))
        if len(prefix) < prefix_len:
            raise FormatError("MGRID 头长度字段被截断", offset=len(MAGIC), path=str(path))
        (length,) = _LENGTH.unpack(prefix[len(MAGIC):])
        raw = fh.read(length)
    if len(raw) != length:
        raise FormatError(f"MGRID 头被截断：声明 {length} 字节，实际 {len(raw)}", offset=prefix_len, path=str(path))
    try:
        header = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"MGRID 头不是合法 JSON: {e}", offset=prefix_len, path=str(path)) from e
    if header.get("magic") != MAGIC.decode("ascii") or header.get("version") != VERSION:
        raise FormatError(
            f"MGRID 魔数/版本不受支持: {header.get('magic')} v{header.get('version')}",
            offset=prefix_len, path=str(path),
        )
    return header, prefix_len + length


class GridDataset:
    """
    MGRID 数据集句柄。

    负载通过只读 memmap 访问，任意一天常数时间随机读取；
    每次读取负载都记入 access_log，用于检查划分之间没有泄漏。
    """

    def __init__(self, path: PathLike, header: Dict[str, Any], payload_offset: int, grid: GridSpec):
        self.path = Path(path)
        self.header = header
        self.grid = grid
        self.channel_names: List[str] = [c["name"] for c in header["channels"]]
        self.channel_units: List[str] = [c["unit"] for c in header["channels"]]
        self.dates: List[date] = [date.fromisoformat(d) for d in header["dates"]]
        self._index = {d: i for i, d in enumerate(self.dates)}
        H, W = grid.dims
        shape = (len(self.dates), len(self.channel_names) + 2, H, W)
        if len(self.dates) == 0:
            self._data = np.empty(shape, dtype=_FLOAT)
        else:
            self._data = np.memmap(self.path, dtype=_FLOAT, mode="r", offset=payload_offset, shape=shape)
        self._lock = threading.Lock()
        self.access_log: List[int] = []

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def num_channels(self) -> int:
        return len(self.channel_names)

    def index_of(self, day: date) -> int:
        try:
            return self._index[day]
        except KeyError:
            raise DataError(f"数据集中没有日期 {day}", date=day.isoformat()) from None

    def _record(self, index: int) -> None:
        if not 0 <= index < len(self.dates):
            raise DataError(f"样本索引越界: {index}", index=index, size=len(self.dates))
        with self._lock:
            self.access_log.append(index)

    def __getitem__(self, index: int) -> GridSample:
        self._record(index)
        block = np.array(self._data[index])
        C = self.num_channels
        return GridSample(self.dates[index], block[:C], block[C], block[C + 1])

    def accessed_years(self) -> List[int]:
        with self._lock:
            return sorted({self.dates[i].year for i in self.access_log})

    def reset_access_log(self) -> None:
        with self._lock:
            self.access_log.clear()

    def describe(self) -> Dict[str, Any]:
        """数据集摘要（convert-check 输出）"""
        return {
            "path": str(self.path),
            "grid": self.grid.model_dump(mode="json"),
            "height": self.grid.height,
            "width": self.grid.width,
            "channels": [{"name": n, "unit": u} for n, u in zip(self.channel_names, self.channel_units)],
            "days": len(self.dates),
            "first_date": self.dates[0].isoformat() if self.dates else None,
            "last_date": self.dates[-1].isoformat() if self.dates else None,
            "years": sorted({d.year for d in self.dates}),
        }


def load_dataset(path: PathLike, grid: Optional[GridSpec] = None) -> GridDataset:
    """
    打开 MGRID 文件。

    Raises:
        FormatError: 魔数/版本不符、负载被截断或有多余字节（带字节偏移）
        DimensionError: 头中的 height/width 与网格不符
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"数据集不存在: {path}")
    header, payload_offset = read_header(path)
    header_grid = GridSpec.model_validate(header["grid"])
    grid = grid or header_grid
    if header_grid != grid:
        raise DimensionError("MGRID 网格与期望网格不符", axis="grid", expected=grid.model_dump(), actual=header["grid"])
    for axis, declared, expected in (("height", header.get("height"), grid.height), ("width", header.get("width"), grid.width)):
        if declared != expected:
            raise DimensionError(f"MGRID 头声明 {axis}={declared}，网格要求 {expected}", axis=axis, expected=expected, actual=declared)

    day_bytes = (len(header["channels"]) + 2) * grid.height * grid.width * _FLOAT.itemsize
    expected_bytes = len(header["dates"]) * day_bytes
    actual_bytes = path.stat().st_size - payload_offset
    if actual_bytes < expected_bytes:
        complete = actual_bytes // day_bytes
        raise FormatError(
            f"MGRID 负载被截断：第 {complete} 天不完整（期望 {expected_bytes} 字节，实际 {actual_bytes}）",
            offset=payload_offset + complete * day_bytes, path=str(path),
        )
    if actual_bytes > expected_bytes:
        raise FormatError(
            f"MGRID 负载末尾有 {actual_bytes - expected_bytes} 个多余字节",
            offset=payload_offset + expected_bytes, path=str(path),
        )
    return GridDataset(path, header, payload_offset, grid)
