"""
z-score 标准化统计量

只在训练集有效像素上单遍流式累计（Chan 合并公式），总体标准差。
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Sequence, Union

import numpy as np

from mjollnir.core.data.mgrid import GridDataset
from mjollnir.core.exceptions import DataError, DimensionError
from mjollnir.core.loss import anomaly_threshold

PathLike = Union[str, Path]


@dataclass
class NormStats:
    """逐通道均值与标准差"""

    channels: List[str]
    mean: np.ndarray
    std: np.ndarray
    count: int = 0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != (len(self.channels),) or self.std.shape != (len(self.channels),):
            raise DimensionError("NormStats 通道数不一致", axis="channels", expected=len(self.channels), actual=self.mean.shape)
        bad = [c for c, s in zip(self.channels, self.std) if not (np.isfinite(s) and s > 0)]
        if bad:
            raise DataError(f"通道标准差必须为正: {bad}", channels=bad)

    def _broadcast(self, x: np.ndarray):
        shape = [1] * x.ndim
        shape[-3] = len(self.channels)
        return self.mean.reshape(shape), self.std.reshape(shape)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        """x 形状 (..., C, H, W)"""
        mean, std = self._broadcast(x)
        return (np.asarray(x, dtype=np.float64) - mean) / std

    def denormalize(self, x: np.ndarray) -> np.ndarray:
        mean, std = self._broadcast(x)
        return np.asarray(x, dtype=np.float64) * std + mean

    def to_dict(self) -> dict:
        return {
            "channels": list(self.channels),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "count": int(self.count),
        }

    def save(self, path: PathLike, **extra) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {**self.to_dict(), **extra}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: PathLike) -> "NormStats":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(channels=data["channels"], mean=data["mean"], std=data["std"], count=data.get("count", 0))


class _RunningMoments:
    """逐通道流式均值/二阶中心矩"""

    def __init__(self, channels: int):
        self.n = np.zeros(channels, dtype=np.float64)
        self.mean = np.zeros(channels, dtype=np.float64)
        self.m2 = np.zeros(channels, dtype=np.float64)

    def update(self, values: np.ndarray) -> None:
        """values 形状 (C, N)：一批有效像素"""
        nb = values.shape[1]
        if nb == 0:
            return
        values = values.astype(np.float64)
        mean_b = values.mean(axis=1)
        m2_b = ((values - mean_b[:, None]) ** 2).sum(axis=1)
        total = self.n + nb
        delta = mean_b - self.mean
        self.mean = self.mean + delta * (nb / total)
        self.m2 = self.m2 + m2_b + delta * delta * (self.n * nb / total)
        self.n = total

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.m2 / np.maximum(self.n, 1.0))


def compute_norm_stats(dataset: GridDataset, indices: Sequence[int]) -> NormStats:
    """
    在给定（训练集）天的有效像素上计算逐通道均值与标准差。

    Raises:
        DataError: 训练集为空、没有有效像素或某通道方差为零
    """
    if len(indices) == 0:
        raise DataError("训练集为空，无法计算标准化统计量")
    moments = _RunningMoments(dataset.num_channels)
    for index in indices:
        sample = dataset[int(index)]
        valid = (sample.mask > 0) & np.isfinite(sample.predictors).all(axis=0)
        moments.update(sample.predictors[:, valid])
    if moments.n[0] == 0:
        raise DataError("训练集没有任何有效像素")
    std = moments.std
    for name, s, mu in zip(dataset.channel_names, std, moments.mean):
        if not s > 1e-12 * max(1.0, abs(mu)):
            raise DataError(f"通道 {name} 方差为零，无法标准化", channel=name)
    return NormStats(list(dataset.channel_names), moments.mean, std, count=int(moments.n[0]))


def iter_valid_targets(dataset: GridDataset, indices: Iterable[int]):
    for index in indices:
        sample = dataset[int(index)]
        valid = (sample.mask > 0) & np.isfinite(sample.target)
        yield sample.target[valid]


def compute_anomaly_threshold(
    dataset: GridDataset,
    indices: Sequence[int],
    q: float = 0.99,
    positive_only: bool = False,
) -> float:
    """训练集有效像素闪电密度的 q 分位数"""
    return anomaly_threshold(iter_valid_targets(dataset, indices), q, positive_only)
