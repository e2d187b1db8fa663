"""
按年份划分与批次组装
"""

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from mjollnir.core.data.mgrid import GridDataset
from mjollnir.core.data.normalization import NormStats
from mjollnir.core.exceptions import DataError, DimensionError
from mjollnir.core.tensor import Tensor4

YearRange = Tuple[int, int]


@dataclass
class DatasetSplits:
    train: List[int]
    val: List[int]
    test: List[int]

    def as_dict(self) -> dict:
        return {"train": self.train, "val": self.val, "test": self.test}


def split_by_year(
    dataset: GridDataset,
    train_years: YearRange = (2010, 2016),
    val_years: YearRange = (2017, 2017),
    test_years: YearRange = (2018, 2018),
) -> DatasetSplits:
    """
    按样本日期的日历年划分（闭区间）。只读取头中的日期，不触碰负载。

    Raises:
        DataError: 年份区间重叠，或样本年份不在任何区间内
    """
    ranges = {"train": train_years, "val": val_years, "test": test_years}
    names = list(ranges)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            (a0, a1), (b0, b1) = ranges[a], ranges[b]
            if a0 <= b1 and b0 <= a1:
                raise DataError(f"{a} 与 {b} 的年份区间重叠", **{a: list(ranges[a]), b: list(ranges[b])})

    splits = DatasetSplits([], [], [])
    for index, day in enumerate(dataset.dates):
        for name, (lo, hi) in ranges.items():
            if lo <= day.year <= hi:
                getattr(splits, name).append(index)
                break
        else:
            raise DataError(f"日期 {day} 不属于任何划分年份区间", date=day.isoformat())
    return splits


@dataclass
class Batch:
    """模型输入批次：x 已标准化，y 与 mask 为原始值，形状 (B, 1, H, W)"""

    x: Tensor4
    y: np.ndarray
    mask: np.ndarray
    indices: List[int]
    dates: List[date]

    @property
    def size(self) -> int:
        return len(self.indices)


def make_batch(
    dataset: GridDataset,
    indices: Sequence[int],
    stats: NormStats,
    dtype=np.float32,
) -> Batch:
    """
    读取并标准化一批样本。

    掩码为 0 或预报因子/目标非有限的像素：标准化后置 0，掩码置 0。
    MGRID 中无效像素的存储值任意（写出时 NaN 存为 0），不能参与标准化。
    目标值不做标准化。
    """
    if list(stats.channels) != dataset.channel_names:
        raise DimensionError(
            "标准化统计量的通道与数据集不一致",
            axis="channels", expected=dataset.channel_names, actual=list(stats.channels),
        )
    if len(indices) == 0:
        raise DataError("批次为空")
    H, W = dataset.grid.dims
    C = dataset.num_channels
    x = np.empty((len(indices), C, H, W), dtype=dtype)
    y = np.empty((len(indices), 1, H, W), dtype=dtype)
    m = np.empty((len(indices), 1, H, W), dtype=dtype)
    dates = []
    for row, index in enumerate(indices):
        sample = dataset[int(index)]
        bad = ~np.isfinite(sample.predictors).all(axis=0) | ~np.isfinite(sample.target)
        valid = (sample.mask > 0) & ~bad
        normalized = stats.normalize(sample.predictors)
        x[row] = np.where(valid[None] & np.isfinite(normalized), normalized, 0.0)
        y[row, 0] = np.where(bad, 0.0, sample.target)
        m[row, 0] = valid.astype(np.float64)
        dates.append(sample.date)
    return Batch(Tensor4(x), y, m, [int(i) for i in indices], dates)


def batch_indices(indices: Sequence[int], batch_size: int) -> List[List[int]]:
    return [list(indices[i:i + batch_size]) for i in range(0, len(indices), batch_size)]


class BatchLoader:
    """
    后台线程预取批次，交付顺序与 batches 一致。
    """

    def __init__(
        self,
        dataset: GridDataset,
        batches: Sequence[Sequence[int]],
        stats: NormStats,
        dtype=np.float32,
        prefetch: int = 2,
    ):
        self.dataset = dataset
        self.batches = [list(b) for b in batches]
        self.stats = stats
        self.dtype = dtype
        self.prefetch = max(0, int(prefetch))

    def __len__(self) -> int:
        return len(self.batches)

    def __iter__(self) -> Iterator[Batch]:
        if self.prefetch == 0:
            for b in self.batches:
                yield make_batch(self.dataset, b, self.stats, self.dtype)
            return
        with ThreadPoolExecutor(max_workers=1, thread_name_prefix="mjollnir-batch") as pool:
            pending = deque()
            queue = iter(self.batches)
            for b in queue:
                pending.append(pool.submit(make_batch, self.dataset, b, self.stats, self.dtype))
                if len(pending) >= self.prefetch:
                    break
            while pending:
                batch = pending.popleft().result()
                nxt = next(queue, None)
                if nxt is not None:
                    pending.append(pool.submit(make_batch, self.dataset, nxt, self.stats, self.dtype))
                yield batch
