"""
经纬度网格与单日样本
"""

from dataclasses import dataclass
from datetime import date, timedelta
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class GridSpec(BaseModel):
    """
    等经纬度网格，格点中心约定。

    纬度索引 0 为最南一行；中心坐标 = min + resolution·(i + 0.5)。
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    lat_min: float = Field(default=-60.0, ge=-90.0, description="南边界（度）")
    lat_max: float = Field(default=60.0, le=90.0, description="北边界（度）")
    lon_min: float = Field(default=-180.0, description="西边界（度）")
    lon_max: float = Field(default=180.0, description="东边界（度）")
    resolution: float = Field(default=1.0, gt=0.0, description="格距（度）")

    @model_validator(mode="after")
    def _integral_dims(self):
        if self.lat_max <= self.lat_min:
            raise ValueError("lat_max 必须大于 lat_min")
        if abs(self.lon_max - self.lon_min - 360.0) > 1e-9:
            raise ValueError("经度范围必须覆盖 360°")
        for span in (self.lat_max - self.lat_min, self.lon_max - self.lon_min):
            cells = span / self.resolution
            if abs(cells - round(cells)) > 1e-9:
                raise ValueError(f"范围 {span}° 不能被格距 {self.resolution}° 整除")
        return self

    @property
    def height(self) -> int:
        return int(round((self.lat_max - self.lat_min) / self.resolution))

    @property
    def width(self) -> int:
        return int(round((self.lon_max - self.lon_min) / self.resolution))

    @property
    def dims(self) -> Tuple[int, int]:
        return self.height, self.width

    def lat_centers(self) -> np.ndarray:
        return self.lat_min + self.resolution * (np.arange(self.height) + 0.5)

    def lon_centers(self) -> np.ndarray:
        return self.lon_min + self.resolution * (np.arange(self.width) + 0.5)


def calendar_days(years: Sequence[int]) -> List[date]:
    """给定年份的全部日历日，按时间顺序"""
    days: List[date] = []
    for year in years:
        d = date(year, 1, 1)
        while d.year == year:
            days.append(d)
            d += timedelta(days=1)
    return days


@dataclass
class GridSample:
    """单日样本：预报因子 (C, H, W)、闪电密度 (H, W)、有效掩码 (H, W)"""

    date: date
    predictors: np.ndarray
    target: np.ndarray
    mask: np.ndarray

    @property
    def channels(self) -> int:
        return self.predictors.shape[0]
