"""
时空聚合：月气候态、年均、区域均值、纬向/经向廓线、半球序列

空间均值默认是有效格点的等权平均；weighting="cosine" 时按纬度余弦加权。
"""

from dataclasses import dataclass
from datetime import date
from typing import Literal, Optional, Sequence, Tuple

import numpy as np

from mjollnir.core.data.grid import GridSpec, calendar_days
from mjollnir.core.evaluation.regions import RegionBox
from mjollnir.core.exceptions import CoverageError, DataError, DimensionError, RegionError

Weighting = Literal["none", "cosine"]
Band = Literal["tropics", "extratropics"]

TROPICS_EDGE = 30.0


@dataclass
class MonthlyFields:
    """12 个月的场 (12, H, W) 及逐月有效掩码"""

    values: np.ndarray
    valid: np.ndarray
    year: int


@dataclass
class MonthlySeries:
    """12 个按日历顺序排列的月值"""

    label: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (12,):
            raise DimensionError("MonthlySeries 必须恰好 12 个值", axis="months", expected=12, actual=self.values.shape)


@dataclass
class Profile:
    """廓线：坐标、数值与缺测标记（整行/列无有效格点）"""

    coords: np.ndarray
    values: np.ndarray
    missing: np.ndarray

    def present(self) -> np.ndarray:
        return ~self.missing


def _valid_or_all(mask: Optional[np.ndarray], shape) -> np.ndarray:
    if mask is None:
        return np.ones(shape, dtype=bool)
    mask = np.asarray(mask)
    if mask.shape != tuple(shape):
        raise DimensionError("掩码形状不一致", axis="mask", expected=tuple(shape), actual=mask.shape)
    return mask > 0


def _row_weights(grid: GridSpec, weighting: str) -> np.ndarray:
    if weighting == "none":
        return np.ones(grid.height)
    if weighting == "cosine":
        return np.cos(np.deg2rad(grid.lat_centers()))
    raise DataError(f"未知的加权方式: {weighting}", weighting=weighting)


def monthly_climatology(
    fields: np.ndarray,
    dates: Sequence[date],
    masks: Optional[np.ndarray] = None,
) -> MonthlyFields:
    """
    一年逐日场 (N, H, W) → 逐月逐像素均值 (12, H, W)。

    Raises:
        CoverageError: 该年有缺失日期（列出缺失日期）
    """
    fields = np.asarray(fields, dtype=np.float64)
    if fields.ndim != 3 or fields.shape[0] != len(dates):
        raise DimensionError("逐日场需为 (N, H, W) 且 N 等于日期数", axis="days", expected=len(dates), actual=fields.shape)
    if not dates:
        raise CoverageError("没有任何日期")
    years = {d.year for d in dates}
    if len(years) != 1:
        raise DataError(f"月气候态只接受单一年份，实际 {sorted(years)}", years=sorted(years))
    year = years.pop()
    present = set(dates)
    missing = [d.isoformat() for d in calendar_days([year]) if d not in present]
    if missing:
        raise CoverageError(f"{year} 年缺少 {len(missing)} 天", missing_dates=missing)

    valid = _valid_or_all(masks, fields.shape)
    months = np.array([d.month for d in dates])
    H, W = fields.shape[1:]
    values = np.zeros((12, H, W))
    counts = np.zeros((12, H, W))
    for m in range(12):
        sel = months == m + 1
        v = valid[sel]
        values[m] = np.where(v, fields[sel], 0.0).sum(axis=0)
        counts[m] = v.sum(axis=0)
    has = counts > 0
    values = np.where(has, values / np.maximum(counts, 1.0), 0.0)
    return MonthlyFields(values=values, valid=has, year=year)


def annual_mean(monthly: np.ndarray, valid: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    12 个月场的等权平均（不按天数加权）。
    给定掩码时在每个像素的有效月份上平均；返回 (field, valid)。
    """
    monthly = np.asarray(monthly, dtype=np.float64)
    if monthly.ndim < 1 or monthly.shape[0] != 12:
        raise DimensionError("annual_mean 需要恰好 12 个月场", axis="months", expected=12, actual=monthly.shape[:1])
    ok = _valid_or_all(valid, monthly.shape)
    counts = ok.sum(axis=0)
    total = np.where(ok, monthly, 0.0).sum(axis=0)
    has = counts > 0
    return np.where(has, total / np.maximum(counts, 1), 0.0), has


def region_mean(
    field: np.ndarray,
    box: RegionBox,
    grid: GridSpec,
    mask: Optional[np.ndarray] = None,
    weighting: str = "none",
) -> float:
    """区域内有效格点均值；区域内无有效格点时抛出 RegionError"""
    field = np.asarray(field, dtype=np.float64)
    if field.shape != grid.dims:
        raise DimensionError("场的形状与网格不一致", axis="grid", expected=grid.dims, actual=field.shape)
    sel = box.cell_mask(grid) & _valid_or_all(mask, field.shape)
    if not sel.any():
        raise RegionError(f"区域 {box.name} 内没有有效格点", region=box.name)
    w = np.broadcast_to(_row_weights(grid, weighting)[:, None], field.shape)
    return float(np.sum(np.where(sel, field * w, 0.0)) / np.sum(np.where(sel, w, 0.0)))


def region_cell_count(box: RegionBox, grid: GridSpec, mask: Optional[np.ndarray] = None) -> int:
    return int(np.count_nonzero(box.cell_mask(grid) & _valid_or_all(mask, grid.dims)))


def zonal_lat_profile(field: np.ndarray, grid: GridSpec, mask: Optional[np.ndarray] = None) -> Profile:
    """每个纬度行上所有经度有效格点的均值；整行无效则标为缺测"""
    field = np.asarray(field, dtype=np.float64)
    valid = _valid_or_all(mask, field.shape)
    counts = valid.sum(axis=1)
    sums = np.where(valid, field, 0.0).sum(axis=1)
    missing = counts == 0
    return Profile(grid.lat_centers(), np.where(missing, 0.0, sums / np.maximum(counts, 1)), missing)


def band_rows(grid: GridSpec, band: str) -> np.ndarray:
    """热带 = [−30°, +30°]（含 30° 行），温带 = 其余行"""
    lat = grid.lat_centers()
    tropics = (lat >= -TROPICS_EDGE) & (lat <= TROPICS_EDGE)
    if band == "tropics":
        return tropics
    if band == "extratropics":
        return ~tropics
    raise DataError(f"未知的纬度带: {band}", band=band)


def zonal_lon_profile(
    field: np.ndarray,
    grid: GridSpec,
    band: str = "tropics",
    mask: Optional[np.ndarray] = None,
    weighting: str = "none",
) -> Profile:
    """每个经度列上指定纬度带内有效格点的均值"""
    field = np.asarray(field, dtype=np.float64)
    valid = _valid_or_all(mask, field.shape) & band_rows(grid, band)[:, None]
    w = np.broadcast_to(_row_weights(grid, weighting)[:, None], field.shape)
    weights = np.where(valid, w, 0.0).sum(axis=0)
    sums = np.where(valid, field * w, 0.0).sum(axis=0)
    missing = weights == 0
    return Profile(grid.lon_centers(), np.where(missing, 0.0, sums / np.where(missing, 1.0, weights)), missing)


HEMISPHERES = (
    RegionBox(name="North", lat_min=0.0, lat_max=90.0, lon_min=-180.0, lon_max=180.0),
    RegionBox(name="South", lat_min=-90.0, lat_max=0.0, lon_min=-180.0, lon_max=180.0),
)


def regional_series(
    monthly: MonthlyFields,
    box: RegionBox,
    grid: GridSpec,
    weighting: str = "none",
    valid: Optional[np.ndarray] = None,
) -> MonthlySeries:
    """区域的 12 个月均值序列"""
    ok = monthly.valid if valid is None else valid
    return MonthlySeries(
        label=box.name,
        values=[region_mean(monthly.values[m], box, grid, ok[m], weighting) for m in range(12)],
    )


def hemisphere_series(
    monthly: MonthlyFields,
    grid: GridSpec,
    weighting: str = "none",
    valid: Optional[np.ndarray] = None,
) -> Tuple[MonthlySeries, MonthlySeries]:
    """北/南半球逐月均值（格点中心不落在赤道上，切分是精确的）"""
    north, south = (regional_series(monthly, box, grid, weighting, valid) for box in HEMISPHERES)
    return north, south
