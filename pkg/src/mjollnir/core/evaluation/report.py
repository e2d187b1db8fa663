"""
评估报告

对测试年的逐日预测与观测计算全部诊断量，每个诊断写一个 CSV，另附 summary.json。
报告是输入的纯函数，重复运行得到逐字节相同的文件。

CSV 列定义：
    annual_mean.csv            lat, lon, valid, observed, predicted, observed_log1p, predicted_log1p
    regional_monthly.csv       region, month, observed, predicted
    regional_summary.csv       region, cells, r, rmse
    zonal_lat.csv              lat, missing, observed, predicted
    zonal_lon_tropics.csv      lon, missing, observed, predicted
    zonal_lon_extratropics.csv lon, missing, observed, predicted
    hemisphere_monthly.csv     month, north_observed, north_predicted, south_observed, south_predicted
    subregional_monthly.csv    region, scheme, subregion, month, observed, predicted
    subregional_summary.csv    region, scheme, subregion, cells, r, rmse
"""

import json
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from mjollnir.core.data.grid import GridSpec
from mjollnir.core.evaluation.aggregation import (
    Profile,
    annual_mean,
    hemisphere_series,
    monthly_climatology,
    region_cell_count,
    regional_series,
    zonal_lat_profile,
    zonal_lon_profile,
)
from mjollnir.core.evaluation.metrics import log1p_field, pearson_or_none, rmse
from mjollnir.core.evaluation.regions import DEFAULT_REGIONS, DEFAULT_SCHEMES, RegionBox, subregion_split
from mjollnir.core.exceptions import AlignmentError, DimensionError
from mjollnir.infrastructure.monitoring.logging import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]
MONTHS = list(range(1, 13))
SUMMARY_FILE = "summary.json"
BOUNDS = ("lat_min", "lat_max", "lon_min", "lon_max")


@dataclass
class EvaluationReport:
    """诊断表格与摘要"""

    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)

    def write(self, output_dir: PathLike) -> List[Path]:
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for name in sorted(self.tables):
            path = output_dir / f"{name}.csv"
            self.tables[name].to_csv(path, index=False, lineterminator="\n")
            written.append(path)
        summary_path = output_dir / SUMMARY_FILE
        summary_path.write_text(json.dumps(self.summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written.append(summary_path)
        return written


def _profile_stats(obs: Profile, pred: Profile) -> Dict[str, Optional[float]]:
    keep = obs.present() & pred.present()
    if not keep.any():
        return {"r": None, "rmse": None}
    return {"r": pearson_or_none(obs.values[keep], pred.values[keep]), "rmse": rmse(obs.values[keep], pred.values[keep])}


def _bounds(box: RegionBox) -> Dict[str, float]:
    return {key: getattr(box, key) for key in BOUNDS}


def _profile_frame(coord: str, obs: Profile, pred: Profile) -> pd.DataFrame:
    return pd.DataFrame({
        coord: obs.coords,
        "missing": obs.missing | pred.missing,
        "observed": obs.values,
        "predicted": pred.values,
    })


def evaluate(
    predictions: np.ndarray,
    observations: np.ndarray,
    masks: Optional[np.ndarray],
    dates: Sequence[date],
    grid: GridSpec,
    regions: Sequence[RegionBox] = tuple(DEFAULT_REGIONS),
    schemes: Optional[Mapping[str, str]] = None,
    weighting: str = "none",
    prediction_dates: Optional[Sequence[date]] = None,
) -> EvaluationReport:
    """
    计算全部诊断：
        全球年均场相关（log1p 与原始值）、区域月序列散点与相关、纬向/经向廓线相关与 RMSE、
        半球逐月序列相关、子区域月序列相关。

    Raises:
        AlignmentError: 预测与观测日期或形状不对齐
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    observations = np.asarray(observations, dtype=np.float64)
    if prediction_dates is not None and list(prediction_dates) != list(dates):
        raise AlignmentError("预测与观测日期不一致")
    if predictions.shape != observations.shape:
        raise AlignmentError(f"预测形状 {predictions.shape} 与观测形状 {observations.shape} 不一致")
    if predictions.shape[1:] != grid.dims:
        raise DimensionError("场的形状与网格不一致", axis="grid", expected=grid.dims, actual=predictions.shape[1:])
    schemes = dict(DEFAULT_SCHEMES if schemes is None else schemes)

    obs_monthly = monthly_climatology(observations, dates, masks)
    pred_monthly = monthly_climatology(predictions, dates, masks)
    valid = obs_monthly.valid
    obs_annual, annual_valid = annual_mean(obs_monthly.values, valid)
    pred_annual, _ = annual_mean(pred_monthly.values, valid)

    report = EvaluationReport()
    summary: Dict[str, Any] = {"year": obs_monthly.year, "days": len(dates), "weighting": weighting}

    # 全球年均场
    obs_log = log1p_field(obs_annual, annual_valid)
    pred_log = log1p_field(pred_annual, annual_valid)
    lat, lon = np.meshgrid(grid.lat_centers(), grid.lon_centers(), indexing="ij")
    report.tables["annual_mean"] = pd.DataFrame({
        "lat": lat.ravel(),
        "lon": lon.ravel(),
        "valid": annual_valid.ravel(),
        "observed": obs_annual.ravel(),
        "predicted": pred_annual.ravel(),
        "observed_log1p": obs_log.ravel(),
        "predicted_log1p": pred_log.ravel(),
    })
    summary["global"] = {
        "cells": int(annual_valid.sum()),
        "r_log1p": pearson_or_none(obs_log[annual_valid], pred_log[annual_valid]),
        "r_raw": pearson_or_none(obs_annual[annual_valid], pred_annual[annual_valid]),
        "rmse_log1p": rmse(obs_log[annual_valid], pred_log[annual_valid]),
        "rmse_raw": rmse(obs_annual[annual_valid], pred_annual[annual_valid]),
    }

    # 区域月序列（散点与气候态共用）
    rows, region_rows = [], []
    summary["regions"] = {}
    for box in regions:
        obs_s = regional_series(obs_monthly, box, grid, weighting, valid)
        pred_s = regional_series(pred_monthly, box, grid, weighting, valid)
        stats = {"r": pearson_or_none(obs_s.values, pred_s.values), "rmse": rmse(obs_s.values, pred_s.values)}
        cells = region_cell_count(box, grid, annual_valid)
        summary["regions"][box.name] = {**stats, "cells": cells}
        region_rows.append({"region": box.name, "cells": cells, **stats, **_bounds(box)})
        rows.extend(
            {"region": box.name, "month": m, "observed": o, "predicted": p}
            for m, o, p in zip(MONTHS, obs_s.values, pred_s.values)
        )
    report.tables["regional_monthly"] = pd.DataFrame(rows, columns=["region", "month", "observed", "predicted"])
    report.tables["regional_summary"] = pd.DataFrame(region_rows, columns=["region", "cells", "r", "rmse", *BOUNDS])

    # 纬向/经向廓线
    summary["zonal"] = {}
    obs_lat = zonal_lat_profile(obs_annual, grid, annual_valid)
    pred_lat = zonal_lat_profile(pred_annual, grid, annual_valid)
    report.tables["zonal_lat"] = _profile_frame("lat", obs_lat, pred_lat)
    summary["zonal"]["lat"] = _profile_stats(obs_lat, pred_lat)
    for band in ("tropics", "extratropics"):
        obs_p = zonal_lon_profile(obs_annual, grid, band, annual_valid, weighting)
        pred_p = zonal_lon_profile(pred_annual, grid, band, annual_valid, weighting)
        report.tables[f"zonal_lon_{band}"] = _profile_frame("lon", obs_p, pred_p)
        summary["zonal"][f"lon_{band}"] = _profile_stats(obs_p, pred_p)

    # 半球
    obs_n, obs_s = hemisphere_series(obs_monthly, grid, weighting, valid)
    pred_n, pred_s = hemisphere_series(pred_monthly, grid, weighting, valid)
    report.tables["hemisphere_monthly"] = pd.DataFrame({
        "month": MONTHS,
        "north_observed": obs_n.values,
        "north_predicted": pred_n.values,
        "south_observed": obs_s.values,
        "south_predicted": pred_s.values,
    })
    summary["hemispheres"] = {
        "north": {"r": pearson_or_none(obs_n.values, pred_n.values), "rmse": rmse(obs_n.values, pred_n.values)},
        "south": {"r": pearson_or_none(obs_s.values, pred_s.values), "rmse": rmse(obs_s.values, pred_s.values)},
    }

    # 子区域
    sub_rows, sub_summary_rows = [], []
    summary["subregions"] = {}
    for box in regions:
        scheme = schemes.get(box.name)
        if scheme is None:
            continue
        entry = summary["subregions"].setdefault(box.name, {"scheme": scheme, "parts": {}})
        for part in subregion_split(box, scheme, grid):
            obs_p = regional_series(obs_monthly, part, grid, weighting, valid)
            pred_p = regional_series(pred_monthly, part, grid, weighting, valid)
            stats = {"r": pearson_or_none(obs_p.values, pred_p.values), "rmse": rmse(obs_p.values, pred_p.values)}
            cells = region_cell_count(part, grid, annual_valid)
            entry["parts"][part.name] = {**stats, "cells": cells}
            sub_summary_rows.append({
                "region": box.name, "scheme": scheme, "subregion": part.name, "cells": cells, **stats, **_bounds(part),
            })
            sub_rows.extend(
                {"region": box.name, "scheme": scheme, "subregion": part.name, "month": m, "observed": o, "predicted": p}
                for m, o, p in zip(MONTHS, obs_p.values, pred_p.values)
            )
    report.tables["subregional_monthly"] = pd.DataFrame(
        sub_rows, columns=["region", "scheme", "subregion", "month", "observed", "predicted"],
    )
    report.tables["subregional_summary"] = pd.DataFrame(
        sub_summary_rows, columns=["region", "scheme", "subregion", "cells", "r", "rmse", *BOUNDS],
    )

    report.summary = summary
    logger.info("评估完成", extra={"year": summary["year"], "r_log1p": summary["global"]["r_log1p"]})
    return report
