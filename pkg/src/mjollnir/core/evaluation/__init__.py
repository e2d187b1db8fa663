"""
评估：指标、区域、聚合、报告与绘图
"""

from mjollnir.core.evaluation.metrics import log1p_field, pearson_or_none, pearson_r, rmse
from mjollnir.core.evaluation.regions import DEFAULT_REGIONS, DEFAULT_SCHEMES, RegionBox, subregion_split
from mjollnir.core.evaluation.aggregation import (
    MonthlyFields,
    MonthlySeries,
    Profile,
    annual_mean,
    band_rows,
    hemisphere_series,
    monthly_climatology,
    region_cell_count,
    region_mean,
    regional_series,
    zonal_lat_profile,
    zonal_lon_profile,
)
from mjollnir.core.evaluation.report import EvaluationReport, evaluate

__all__ = [
    "log1p_field",
    "pearson_or_none",
    "pearson_r",
    "rmse",
    "DEFAULT_REGIONS",
    "DEFAULT_SCHEMES",
    "RegionBox",
    "subregion_split",
    "MonthlyFields",
    "MonthlySeries",
    "Profile",
    "annual_mean",
    "band_rows",
    "hemisphere_series",
    "monthly_climatology",
    "region_cell_count",
    "region_mean",
    "regional_series",
    "zonal_lat_profile",
    "zonal_lon_profile",
    "EvaluationReport",
    "evaluate",
]
