"""
评估图（SVG）

从评估目录中的 CSV 重新绘图；CSV 是完整数据，图只是便于浏览。
"""

from pathlib import Path
from typing import List, Optional, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from mjollnir.infrastructure.monitoring.logging import get_logger  # noqa: E402

logger = get_logger(__name__)

PathLike = Union[str, Path]

# 固定 SVG 内部 id 与元数据，重复绘图得到相同文件
plt.rcParams.update({
    "svg.hashsalt": "mjollnir",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
})

MONTH_LABELS = ["J", "F", "M", "A", "M", "J", "J", "A", "S", "O", "N", "D"]


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return path


def _r_label(value) -> str:
    return "r = n/a" if pd.isna(value) else f"r = {float(value):.2f}"


def _draw_boxes(ax, boxes: pd.DataFrame, lon_lo: float, lon_hi: float) -> None:
    """区域框；跨日期变更线的框拆成两段"""
    for row in boxes.itertuples(index=False):
        if row.lon_min < row.lon_max:
            spans = [(row.lon_min, row.lon_max)]
        else:
            spans = [(row.lon_min, lon_hi), (lon_lo, row.lon_max)]
        for lo, hi in spans:
            ax.add_patch(Rectangle(
                (lo, row.lat_min), hi - lo, row.lat_max - row.lat_min,
                fill=False, edgecolor="white", linewidth=0.9,
            ))
        ax.text(spans[0][0] + 1.0, row.lat_max - 1.0, row.region, color="white", fontsize=6, va="top")


def plot_annual_maps(frame: pd.DataFrame, path: Path, boxes: Optional[pd.DataFrame] = None) -> Path:
    lats = np.sort(frame["lat"].unique())
    lons = np.sort(frame["lon"].unique())
    half_lon = (lons[1] - lons[0]) / 2.0 if len(lons) > 1 else 0.5
    half_lat = (lats[1] - lats[0]) / 2.0 if len(lats) > 1 else 0.5
    extent = [lons[0] - half_lon, lons[-1] + half_lon, lats[0] - half_lat, lats[-1] + half_lat]
    fig, axes = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    for ax, column, title in zip(axes, ("observed_log1p", "predicted_log1p"), ("Observed", "Predicted")):
        grid = frame.pivot(index="lat", columns="lon", values=column).loc[lats, lons].to_numpy()
        valid = frame.pivot(index="lat", columns="lon", values="valid").loc[lats, lons].to_numpy().astype(bool)
        image = ax.imshow(np.ma.masked_where(~valid, grid), origin="lower", extent=extent, aspect="auto", cmap="viridis")
        ax.set_title(f"{title} annual mean, log(1+x)")
        ax.set_ylabel("Latitude")
        if boxes is not None:
            _draw_boxes(ax, boxes, extent[0], extent[1])
        fig.colorbar(image, ax=ax)
    axes[-1].set_xlabel("Longitude")
    return _save(fig, path)


def plot_regional_scatter(
    frame: pd.DataFrame,
    path: Path,
    group: str = "region",
    summary: Optional[pd.DataFrame] = None,
) -> Path:
    """每个区域一格散点；给定 summary 时在每格标注 r"""
    names = list(dict.fromkeys(frame[group]))
    r_by_name = {} if summary is None else dict(zip(summary[group], summary["r"]))
    cols = min(len(names), 4) or 1
    rows = max(1, int(np.ceil(len(names) / cols)))
    fig, axes = plt.subplots(rows, cols, figsize=(3 * cols, 3 * rows), squeeze=False)
    for ax, name in zip(axes.ravel(), names):
        sub = frame[frame[group] == name]
        ax.scatter(sub["observed"], sub["predicted"], s=12)
        lo = float(min(sub["observed"].min(), sub["predicted"].min()))
        hi = float(max(sub["observed"].max(), sub["predicted"].max()))
        ax.plot([lo, hi], [lo, hi], color="grey", linewidth=0.8, linestyle="--")
        if name in r_by_name:
            ax.text(0.04, 0.96, _r_label(r_by_name[name]), transform=ax.transAxes, va="top")
        ax.set_title(name)
        ax.set_xlabel("Observed")
        ax.set_ylabel("Predicted")
    for ax in axes.ravel()[len(names):]:
        ax.set_visible(False)
    return _save(fig, path)


def plot_monthly_climatology(frame: pd.DataFrame, path: Path) -> Path:
    names = list(dict.fromkeys(frame["region"]))
    fig, axes = plt.subplots(len(names), 1, figsize=(6, 2.2 * max(len(names), 1)), squeeze=False, sharex=True)
    for ax, name in zip(axes[:, 0], names):
        sub = frame[frame["region"] == name]
        ax.plot(sub["month"], sub["observed"], marker="o", label="Observed")
        ax.plot(sub["month"], sub["predicted"], marker="s", label="Predicted")
        ax.set_title(name)
    axes[0, 0].legend(loc="upper right")
    axes[-1, 0].set_xticks(range(1, 13), MONTH_LABELS)
    return _save(fig, path)


def plot_profile(frame: pd.DataFrame, coord: str, path: Path, title: str) -> Path:
    keep = ~frame["missing"].astype(bool)
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.plot(frame.loc[keep, coord], frame.loc[keep, "observed"], label="Observed")
    ax.plot(frame.loc[keep, coord], frame.loc[keep, "predicted"], label="Predicted")
    ax.set_xlabel("Latitude" if coord == "lat" else "Longitude")
    ax.set_ylabel("Flash density")
    ax.set_title(title)
    ax.legend()
    return _save(fig, path)


def plot_hemispheres(frame: pd.DataFrame, path: Path) -> Path:
    fig, axes = plt.subplots(1, 2, figsize=(8, 3), sharey=True)
    for ax, hemi in zip(axes, ("north", "south")):
        ax.plot(frame["month"], frame[f"{hemi}_observed"], marker="o", label="Observed")
        ax.plot(frame["month"], frame[f"{hemi}_predicted"], marker="s", label="Predicted")
        ax.set_title(f"{hemi.capitalize()}ern Hemisphere")
        ax.set_xticks(range(1, 13), MONTH_LABELS)
    axes[0].legend()
    return _save(fig, path)


def render_report(evaluation_dir: PathLike, output_dir: PathLike) -> List[Path]:
    """读取评估 CSV，写出全部 SVG"""
    src = Path(evaluation_dir)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    regions = pd.read_csv(src / "regional_summary.csv")
    written = [
        plot_annual_maps(pd.read_csv(src / "annual_mean.csv"), out / "annual_mean.svg", boxes=regions),
        plot_regional_scatter(pd.read_csv(src / "regional_monthly.csv"), out / "regional_scatter.svg", summary=regions),
        plot_monthly_climatology(pd.read_csv(src / "regional_monthly.csv"), out / "regional_climatology.svg"),
        plot_profile(pd.read_csv(src / "zonal_lat.csv"), "lat", out / "zonal_lat.svg", "Latitudinal profile"),
        plot_profile(pd.read_csv(src / "zonal_lon_tropics.csv"), "lon", out / "zonal_lon_tropics.svg", "Tropics (30S-30N)"),
        plot_profile(pd.read_csv(src / "zonal_lon_extratropics.csv"), "lon", out / "zonal_lon_extratropics.svg", "Extratropics"),
        plot_hemispheres(pd.read_csv(src / "hemisphere_monthly.csv"), out / "hemisphere_monthly.svg"),
    ]
    sub = pd.read_csv(src / "subregional_monthly.csv")
    if not sub.empty:
        parts = pd.read_csv(src / "subregional_summary.csv")
        written.append(plot_regional_scatter(sub, out / "subregional_scatter.svg", group="subregion", summary=parts))
    logger.info("评估图已生成", extra={"count": len(written), "output_dir": str(out)})
    return written
