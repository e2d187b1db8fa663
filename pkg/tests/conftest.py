"""
测试共享夹具：小型网络配置、粗网格与小型合成数据集
"""

import json
from datetime import date
from pathlib import Path

import numpy as np
import pytest

from mjollnir.core.config.settings import reset_settings
from mjollnir.core.data import GridSpec, MgridWriter, SYNTHETIC_CHANNELS
from mjollnir.core.data.synthetic import SyntheticGenerator
from mjollnir.core.nn import ModelConfig

TINY_WIDTHS = (4, 8, 8, 8)
TINY_DEPTHS = (1, 1, 2, 1)


def tiny_model_config(**overrides) -> ModelConfig:
    """宽度 4/8/8/8、深度 1/1/2/1 的小网络"""
    values = {"stage_widths": TINY_WIDTHS, "stage_depths": TINY_DEPTHS}
    values.update(overrides)
    return ModelConfig(**values)


def write_synthetic(path: Path, grid: GridSpec, days, seed: int = 0, noise: float = 0.1) -> Path:
    generator = SyntheticGenerator(grid, seed=seed, noise=noise)
    with MgridWriter(path, grid, SYNTHETIC_CHANNELS, list(days)) as writer:
        for _, predictors, density in generator.iter_days(days):
            writer.write_day(predictors, density)
    return path


def small_days():
    """2010 年 8 天（训练）、2011 年 4 天（验证）、2012 年 4 天（测试）"""
    return (
        [date(2010, 1, d) for d in range(1, 9)]
        + [date(2011, 6, d) for d in range(1, 5)]
        + [date(2012, 7, d) for d in range(1, 5)]
    )


SMALL_YEARS = {"train_years": (2010, 2010), "val_years": (2011, 2011), "test_years": (2012, 2012)}


@pytest.fixture(autouse=True)
def _isolate_settings(monkeypatch):
    """每个测试使用干净的进程设置"""
    for key in ("MJOLLNIR_LOG_LEVEL", "MJOLLNIR_LOG_FORMAT", "MJOLLNIR_LOG_FILE", "MJOLLNIR_PROGRESS"):
        monkeypatch.delenv(key, raising=False)
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config() -> ModelConfig:
    return tiny_model_config()


@pytest.fixture
def make_tiny_config():
    """按需覆盖字段的小网络配置工厂"""
    return tiny_model_config


@pytest.fixture
def make_synthetic():
    """写合成 MGRID 文件的工厂"""
    return write_synthetic


@pytest.fixture
def coarse_grid() -> GridSpec:
    """10° 网格：12 × 36"""
    return GridSpec(resolution=10.0)


@pytest.fixture
def small_grid() -> GridSpec:
    """20° 网格：6 × 18"""
    return GridSpec(resolution=20.0)


@pytest.fixture
def small_years() -> dict:
    return dict(SMALL_YEARS)


@pytest.fixture
def small_dataset_path(tmp_path, small_grid) -> Path:
    return write_synthetic(tmp_path / "small.mgrid", small_grid, small_days())


@pytest.fixture
def tiny_run_config_path(tmp_path) -> Path:
    """与小数据集配套的运行配置文件"""
    config = {
        "seed": 3,
        "model": {"stage_widths": list(TINY_WIDTHS), "stage_depths": list(TINY_DEPTHS)},
        "optim": {"epochs": 2, "batch_size": 4, "lr": 0.001},
        "data": {
            "grid": {"resolution": 20.0},
            "train_years": [2010, 2010],
            "val_years": [2011, 2011],
            "test_years": [2012, 2012],
            "prefetch": 1,
        },
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return path
