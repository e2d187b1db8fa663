"""
区域定义与子区域切分

区域按格点中心判定归属，纬度与经度均为左闭右开区间 [min, max)；
lon_min > lon_max 表示跨越日期变更线。
"""

from typing import Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from mjollnir.core.data.grid import GridSpec
from mjollnir.core.exceptions import RegionError

SplitScheme = Literal["quadrants", "equator_ns", "africa_3way"]


class RegionBox(BaseModel):
    """命名的经纬度矩形"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = Field(..., description="区域名称")
    lat_min: float = Field(..., ge=-90.0, le=90.0)
    lat_max: float = Field(..., ge=-90.0, le=90.0)
    lon_min: float = Field(..., ge=-180.0, le=180.0)
    lon_max: float = Field(..., ge=-180.0, le=180.0)

    @model_validator(mode="after")
    def _ordered(self):
        if self.lat_max <= self.lat_min:
            raise ValueError(f"区域 {self.name}: lat_max 必须大于 lat_min")
        if self.lon_max == self.lon_min:
            raise ValueError(f"区域 {self.name}: 经度范围为空")
        return self

    @property
    def wraps(self) -> bool:
        return self.lon_min > self.lon_max

    @property
    def lon_span(self) -> float:
        return (self.lon_max - self.lon_min) % 360.0

    def lon_mid(self) -> float:
        mid = self.lon_min + self.lon_span / 2.0
        return mid - 360.0 if mid >= 180.0 else mid

    def cell_mask(self, grid: GridSpec) -> np.ndarray:
        """(H, W) 布尔数组：格点中心落在区域内"""
        lat = grid.lat_centers()
        lon = grid.lon_centers()
        rows = (lat >= self.lat_min) & (lat < self.lat_max)
        if self.wraps:
            cols = (lon >= self.lon_min) | (lon < self.lon_max)
        else:
            cols = (lon >= self.lon_min) & (lon < self.lon_max)
        return rows[:, None] & cols[None, :]

    def cell_count(self, grid: GridSpec) -> int:
        return int(np.count_nonzero(self.cell_mask(grid)))


DEFAULT_REGIONS: List[RegionBox] = [
    RegionBox(name="USA", lat_min=25.0, lat_max=50.0, lon_min=-125.0, lon_max=-65.0),
    RegionBox(name="South_America", lat_min=-35.0, lat_max=10.0, lon_min=-85.0, lon_max=-35.0),
    RegionBox(name="Africa", lat_min=-35.0, lat_max=15.0, lon_min=-20.0, lon_max=50.0),
    RegionBox(name="Australia", lat_min=-45.0, lat_max=-10.0, lon_min=110.0, lon_max=155.0),
    RegionBox(name="Maritime_Continent", lat_min=-10.0, lat_max=10.0, lon_min=90.0, lon_max=160.0),
]

DEFAULT_SCHEMES: Dict[str, str] = {
    "USA": "quadrants",
    "South_America": "equator_ns",
    "Africa": "africa_3way",
    "Australia": "quadrants",
    "Maritime_Continent": "quadrants",
}


def _sub(box: RegionBox, suffix: str, **bounds) -> RegionBox:
    values = {
        "lat_min": box.lat_min, "lat_max": box.lat_max,
        "lon_min": box.lon_min, "lon_max": box.lon_max,
    }
    values.update(bounds)
    return RegionBox(name=f"{box.name}_{suffix}", **values)


def subregion_split(box: RegionBox, scheme: str, grid: Optional[GridSpec] = None) -> List[RegionBox]:
    """
    切分子区域：
        quadrants: 在纬度与经度中点切成 NW/NE/SW/SE
        equator_ns: 在 0° 纬度切成 N/S
        africa_3way: 在 0° 纬度切开，北半部再在经度中点切成 NW/NE，南半部为 South

    Raises:
        RegionError: 切分位置不在区域内部，或给定网格时某个子区域不含格点
    """
    lat_mid = (box.lat_min + box.lat_max) / 2.0
    lon_mid = box.lon_mid()
    if scheme == "quadrants":
        parts = [
            _sub(box, "NW", lat_min=lat_mid, lon_max=lon_mid),
            _sub(box, "NE", lat_min=lat_mid, lon_min=lon_mid),
            _sub(box, "SW", lat_max=lat_mid, lon_max=lon_mid),
            _sub(box, "SE", lat_max=lat_mid, lon_min=lon_mid),
        ]
    elif scheme in ("equator_ns", "africa_3way"):
        if not box.lat_min < 0.0 < box.lat_max:
            raise RegionError(f"区域 {box.name} 不跨越赤道，无法按 {scheme} 切分", region=box.name)
        if scheme == "equator_ns":
            parts = [_sub(box, "N", lat_min=0.0), _sub(box, "S", lat_max=0.0)]
        else:
            parts = [
                _sub(box, "NW", lat_min=0.0, lon_max=lon_mid),
                _sub(box, "NE", lat_min=0.0, lon_min=lon_mid),
                _sub(box, "South", lat_max=0.0),
            ]
    else:
        raise RegionError(f"未知的切分方案: {scheme}", scheme=scheme)

    if grid is not None:
        for part in parts:
            if part.cell_count(grid) == 0:
                raise RegionError(f"子区域 {part.name} 不含任何格点（区域过窄）", region=part.name)
    return parts
