"""
合成数据集生成器

9 个合成预报因子（8 个与真实因子同名同量纲的场 + 1 个附加通道），
闪电密度是其中几个因子的固定光滑非线性函数再加噪声。
用于在没有再分析/闪电观测档案的情况下端到端验证流水线。
"""

from datetime import date
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from mjollnir.core.data.grid import GridSpec, calendar_days
from mjollnir.core.data.mgrid import Channel, MgridWriter
from mjollnir.infrastructure.monitoring.logging import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]

SYNTHETIC_CHANNELS: List[Channel] = [
    ("orography", "m"),
    ("t2m", "K"),
    ("d2m", "K"),
    ("z1000", "m"),
    ("w500", "Pa s-1"),
    ("z500", "m"),
    ("z300_700", "m"),
    ("cape", "J kg-1"),
    ("extra_0", "1"),
]


def lightning_signal(predictors: np.ndarray) -> np.ndarray:
    """由原始预报因子计算潜在对流信号 s（与生成器共用）"""
    t2m, d2m, w500, cape = predictors[1], predictors[2], predictors[4], predictors[7]
    cape_n = (cape - 800.0) / 600.0
    lift_n = -w500 / 0.2
    heat_n = (t2m - 290.0) / 8.0
    moist_n = (d2m - t2m + 6.0) / 3.0
    return np.tanh(0.9 * cape_n + 0.5 * lift_n + 0.4 * heat_n + 0.3 * moist_n)


class SyntheticGenerator:
    """逐日生成合成样本；同一 seed 结果逐位相同"""

    def __init__(self, grid: GridSpec, seed: int = 0, noise: float = 0.1):
        self.grid = grid
        self.noise = noise
        self.rng = np.random.default_rng(seed)
        lat = np.deg2rad(grid.lat_centers())[:, None]
        lon = np.deg2rad(grid.lon_centers())[None, :]
        self.lat, self.lon = np.broadcast_arrays(lat, lon)
        self.orography = 1500.0 * np.exp(-((np.rad2deg(self.lat) - 10.0) / 25.0) ** 2) * (1.0 + 0.5 * np.sin(2.0 * self.lon)) ** 2
        self.land = 0.5 + 0.5 * np.sin(3.0 * self.lon + 1.0) * np.cos(2.0 * self.lat)

    def day(self, day: date) -> Tuple[np.ndarray, np.ndarray]:
        """返回 (predictors (9, H, W), flash density (H, W))"""
        H, W = self.grid.dims

        def noise(scale: float) -> np.ndarray:
            return scale * self.rng.standard_normal((H, W))

        phase = 2.0 * np.pi * (day.timetuple().tm_yday - 1) / 365.25
        season = np.sin(phase - np.pi / 2.0) * np.sin(self.lat)
        lat, lon = self.lat, self.lon

        t2m = 300.0 - 25.0 * np.sin(lat) ** 2 + 10.0 * season + 3.0 * self.land - 0.004 * self.orography + noise(1.0)
        d2m = t2m - 6.0 + 3.0 * self.land + 2.0 * np.cos(3.0 * lat) + noise(1.0)
        z1000 = 110.0 + 40.0 * np.sin(phase + lon) * np.cos(lat) + noise(5.0)
        w500 = -0.15 * np.cos(3.0 * lat) * self.land - 0.1 * season + noise(0.08)
        z500 = 5700.0 - 200.0 * np.sin(lat) ** 2 + 60.0 * season + noise(10.0)
        z300_700 = 6100.0 + 0.9 * (t2m - 290.0) * 10.0 + noise(8.0)
        cape = np.maximum(0.0, 800.0 + 900.0 * np.cos(2.5 * lat) * self.land + 500.0 * season + 40.0 * (t2m - 295.0) + noise(150.0))
        extra = self.rng.standard_normal((H, W))
        predictors = np.stack([self.orography, t2m, d2m, z1000, w500, z500, z300_700, cape, extra])

        s = lightning_signal(predictors)
        active = s + self.noise * self.rng.standard_normal((H, W)) > 0.0
        magnitude = np.exp(1.0 + 1.5 * s + self.noise * self.rng.standard_normal((H, W)))
        density = np.where(active, magnitude, 0.0)
        return predictors, density

    def iter_days(self, days: Sequence[date]) -> Iterator[Tuple[date, np.ndarray, np.ndarray]]:
        for d in days:
            predictors, density = self.day(d)
            yield d, predictors, density


def generate_synthetic_dataset(
    path: PathLike,
    grid: Optional[GridSpec] = None,
    years: Sequence[int] = tuple(range(2010, 2019)),
    seed: int = 0,
    noise: float = 0.1,
) -> Path:
    """生成覆盖给定日历年每一天的合成 MGRID 文件"""
    grid = grid or GridSpec()
    days = calendar_days(years)
    generator = SyntheticGenerator(grid, seed=seed, noise=noise)
    with MgridWriter(path, grid, SYNTHETIC_CHANNELS, days) as writer:
        for _, predictors, density in generator.iter_days(days):
            writer.write_day(predictors, density)
    logger.info("合成数据集已生成", extra={"path": str(path), "days": len(days), "height": grid.height, "width": grid.width})
    return Path(path)
