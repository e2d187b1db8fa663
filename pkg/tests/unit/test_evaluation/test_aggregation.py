"""
测试区域、子区域切分与时空聚合
"""

from datetime import date

import numpy as np
import pytest
from pydantic import ValidationError

from mjollnir.core.data.grid import calendar_days
from mjollnir.core.evaluation import (
    DEFAULT_REGIONS,
    DEFAULT_SCHEMES,
    RegionBox,
    annual_mean,
    band_rows,
    hemisphere_series,
    monthly_climatology,
    region_cell_count,
    region_mean,
    subregion_split,
    zonal_lat_profile,
    zonal_lon_profile,
)
from mjollnir.core.exceptions import CoverageError, DimensionError, RegionError


def month_fields(grid, year=2018):
    """每天的场都等于当月月份"""
    days = calendar_days([year])
    fields = np.stack([np.full(grid.dims, float(d.month)) for d in days])
    return fields, days


class TestRegions:
    """区域与子区域测试"""

    def test_usa_cells_on_coarse_grid(self, coarse_grid):
        """测试 10° 网格上美国区域含 3 行 × 6 列格点"""
        usa = next(r for r in DEFAULT_REGIONS if r.name == "USA")
        assert usa.cell_count(coarse_grid) == 18

    def test_wrapping_box_equals_union(self, coarse_grid):
        """测试跨日期变更线的区域等于两侧区域之并"""
        wrap = RegionBox(name="Pacific", lat_min=-20.0, lat_max=20.0, lon_min=160.0, lon_max=-160.0)
        east = RegionBox(name="E", lat_min=-20.0, lat_max=20.0, lon_min=160.0, lon_max=180.0)
        west = RegionBox(name="W", lat_min=-20.0, lat_max=20.0, lon_min=-180.0, lon_max=-160.0)
        assert wrap.wraps
        np.testing.assert_array_equal(wrap.cell_mask(coarse_grid), east.cell_mask(coarse_grid) | west.cell_mask(coarse_grid))
        assert wrap.lon_mid() == -180.0

    def test_invalid_box(self):
        """测试纬度范围反向"""
        with pytest.raises(ValidationError):
            RegionBox(name="bad", lat_min=10.0, lat_max=0.0, lon_min=0.0, lon_max=10.0)

    @pytest.mark.parametrize("region", DEFAULT_REGIONS, ids=lambda r: r.name)
    def test_subregions_partition_region(self, coarse_grid, region):
        """测试子区域互不相交且恰好覆盖父区域"""
        parts = subregion_split(region, DEFAULT_SCHEMES[region.name], coarse_grid)
        masks = np.stack([p.cell_mask(coarse_grid) for p in parts])
        assert masks.sum(axis=0).max() == 1
        np.testing.assert_array_equal(masks.any(axis=0), region.cell_mask(coarse_grid))
        assert all(p.name.startswith(region.name + "_") for p in parts)

    def test_scheme_suffixes(self):
        """测试各方案的子区域命名"""
        box = RegionBox(name="Box", lat_min=-20.0, lat_max=20.0, lon_min=0.0, lon_max=40.0)
        assert [p.name for p in subregion_split(box, "quadrants")] == ["Box_NW", "Box_NE", "Box_SW", "Box_SE"]
        assert [p.name for p in subregion_split(box, "equator_ns")] == ["Box_N", "Box_S"]
        assert [p.name for p in subregion_split(box, "africa_3way")] == ["Box_NW", "Box_NE", "Box_South"]

    def test_split_errors(self, coarse_grid):
        """测试不跨赤道、未知方案与过窄区域"""
        usa = next(r for r in DEFAULT_REGIONS if r.name == "USA")
        with pytest.raises(RegionError):
            subregion_split(usa, "equator_ns")
        with pytest.raises(RegionError):
            subregion_split(usa, "thirds")
        narrow = RegionBox(name="Narrow", lat_min=26.0, lat_max=34.0, lon_min=0.0, lon_max=20.0)
        with pytest.raises(RegionError):
            subregion_split(narrow, "quadrants", coarse_grid)


class TestClimatology:
    """月气候态与年均测试"""

    def test_calendar_days(self):
        """测试日历日来自网格模块，闰年 366 天且有序"""
        days = calendar_days([2016, 2018])
        assert len(days) == 366 + 365
        assert days[0] == date(2016, 1, 1) and days[-1] == date(2018, 12, 31)
        assert date(2016, 2, 29) in days
        assert all(a < b for a, b in zip(days, days[1:]))

    def test_monthly_and_annual(self, small_grid):
        """测试月均等于月份、年均为 6.5"""
        fields, days = month_fields(small_grid)
        monthly = monthly_climatology(fields, days)
        assert monthly.year == 2018
        for m in range(12):
            assert np.all(monthly.values[m] == m + 1)
        annual, valid = annual_mean(monthly.values, monthly.valid)
        np.testing.assert_allclose(annual, 6.5)
        assert valid.all()

    def test_missing_day(self, small_grid):
        """测试缺失日期时列出缺失的天"""
        fields, days = month_fields(small_grid)
        drop = days.index(date(2018, 3, 15))
        with pytest.raises(CoverageError) as exc:
            monthly_climatology(np.delete(fields, drop, axis=0), days[:drop] + days[drop + 1:])
        assert exc.value.missing_dates == ["2018-03-15"]

    def test_masked_days_excluded(self, small_grid):
        """测试掩码为 0 的天不计入月均，整月无效的像素标为无效"""
        fields, days = month_fields(small_grid)
        fields[0, 0, 0] = 1000.0
        masks = np.ones_like(fields)
        masks[0, 0, 0] = 0.0
        january = np.array([d.month == 1 for d in days])
        masks[january, 1, 1] = 0.0
        monthly = monthly_climatology(fields, days, masks)
        assert monthly.values[0, 0, 0] == 1.0
        assert not monthly.valid[0, 1, 1]
        annual, valid = annual_mean(monthly.values, monthly.valid)
        assert annual[1, 1] == pytest.approx(sum(range(2, 13)) / 11.0)
        assert valid[1, 1]

    def test_annual_mean_needs_twelve(self):
        """测试年均需要恰好 12 个月"""
        with pytest.raises(DimensionError):
            annual_mean(np.ones((11, 2, 2)))


class TestSpatialAggregates:
    """区域均值、廓线与半球测试"""

    def test_region_mean_and_weighting(self, coarse_grid):
        """测试区域均值，余弦加权偏向低纬"""
        lat = coarse_grid.lat_centers()
        field = np.broadcast_to(lat[:, None], coarse_grid.dims).copy()
        usa = next(r for r in DEFAULT_REGIONS if r.name == "USA")
        assert region_mean(field, usa, coarse_grid) == pytest.approx(35.0)
        assert region_mean(field, usa, coarse_grid, weighting="cosine") < 35.0
        assert region_cell_count(usa, coarse_grid) == 18

    def test_region_without_valid_cells(self, coarse_grid):
        """测试区域内没有有效格点"""
        usa = next(r for r in DEFAULT_REGIONS if r.name == "USA")
        with pytest.raises(RegionError):
            region_mean(np.ones(coarse_grid.dims), usa, coarse_grid, mask=np.zeros(coarse_grid.dims))

    def test_lat_profile(self, small_grid):
        """测试纬向廓线与整行缺测"""
        field = np.arange(6.0)[:, None] * np.ones(small_grid.dims)
        mask = np.ones(small_grid.dims)
        mask[2] = 0.0
        profile = zonal_lat_profile(field, small_grid, mask)
        np.testing.assert_array_equal(profile.missing, [False, False, True, False, False, False])
        np.testing.assert_array_equal(profile.values[profile.present()], [0.0, 1.0, 3.0, 4.0, 5.0])
        np.testing.assert_array_equal(profile.coords, small_grid.lat_centers())

    def test_band_rows(self, small_grid):
        """测试 20° 网格上热带含 ±30° 行共 4 行"""
        assert band_rows(small_grid, "tropics").sum() == 4
        np.testing.assert_array_equal(band_rows(small_grid, "extratropics"), [True, False, False, False, False, True])

    def test_lon_profile(self, small_grid):
        """测试经向廓线只使用所选纬度带"""
        field = np.zeros(small_grid.dims)
        field[[0, 5]] = 10.0
        field[1:5] = np.arange(18.0)[None, :]
        tropics = zonal_lon_profile(field, small_grid, "tropics")
        extra = zonal_lon_profile(field, small_grid, "extratropics")
        np.testing.assert_array_equal(tropics.values, np.arange(18.0))
        np.testing.assert_array_equal(extra.values, np.full(18, 10.0))
        assert not tropics.missing.any()

    def test_hemispheres(self, small_grid):
        """测试北半球为 +1、南半球为 −1"""
        fields, days = month_fields(small_grid)
        sign = np.where(small_grid.lat_centers() > 0, 1.0, -1.0)[None, :, None]
        monthly = monthly_climatology(fields * 0.0 + sign, days)
        north, south = hemisphere_series(monthly, small_grid)
        np.testing.assert_array_equal(north.values, np.ones(12))
        np.testing.assert_array_equal(south.values, -np.ones(12))
        assert (north.label, south.label) == ("North", "South")
