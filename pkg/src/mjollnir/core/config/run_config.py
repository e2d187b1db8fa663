"""
运行配置

一个 JSON 文件承载全部数值超参数与路径；未知键一律拒绝，
解析后的完整配置（所有默认值展开）回写到每个输出目录。
"""

import json
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from mjollnir.core.data.grid import GridSpec
from mjollnir.core.evaluation.regions import DEFAULT_REGIONS, DEFAULT_SCHEMES, RegionBox
from mjollnir.core.exceptions import ConfigurationError
from mjollnir.core.loss import LossConfig
from mjollnir.core.nn.backbone import ModelConfig
from mjollnir.core.training.optimizer import OptimConfig

PathLike = Union[str, Path]
RESOLVED_CONFIG = "resolved_config.json"


class DataConfig(BaseModel):
    """网格与年份划分"""

    model_config = ConfigDict(extra="forbid")

    grid: GridSpec = Field(default_factory=GridSpec, description="经纬度网格")
    train_years: Tuple[int, int] = Field(default=(2010, 2016), description="训练年份（闭区间）")
    val_years: Tuple[int, int] = Field(default=(2017, 2017), description="验证年份（闭区间）")
    test_years: Tuple[int, int] = Field(default=(2018, 2018), description="测试年份（闭区间）")
    prefetch: int = Field(default=2, ge=0, description="后台预取的批次数")

    @model_validator(mode="after")
    def _ordered_years(self):
        for name in ("train_years", "val_years", "test_years"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} 起始年份大于结束年份")
        return self


class EvaluationConfig(BaseModel):
    """评估区域、子区域方案与推理方式"""

    model_config = ConfigDict(extra="forbid")

    regions: List[RegionBox] = Field(default_factory=lambda: list(DEFAULT_REGIONS), description="区域定义")
    schemes: Dict[str, Literal["quadrants", "equator_ns", "africa_3way"]] = Field(
        default_factory=lambda: dict(DEFAULT_SCHEMES), description="区域名 → 子区域切分方案",
    )
    weighting: Literal["none", "cosine"] = Field(default="none", description="空间平均加权方式")
    prediction_mode: Literal["gated", "expected"] = Field(default="gated", description="双头合并方式")
    threshold: float = Field(default=0.5, gt=0.0, lt=1.0, description="gated 模式的概率阈值 τ")
    batch_size: int = Field(default=8, ge=1, description="推理批大小")

    @model_validator(mode="after")
    def _schemes_reference_regions(self):
        names = {r.name for r in self.regions}
        unknown = sorted(set(self.schemes) - names)
        if unknown:
            raise ValueError(f"schemes 引用了未定义的区域: {unknown}")
        return self


class PathsConfig(BaseModel):
    """输入输出路径（命令行参数可覆盖）"""

    model_config = ConfigDict(extra="forbid")

    dataset: Optional[str] = Field(default=None, description="MGRID 数据集")
    stats: Optional[str] = Field(default=None, description="标准化统计量 JSON")
    checkpoint: Optional[str] = Field(default=None, description="检查点文件")
    output_dir: Optional[str] = Field(default=None, description="输出目录")


class RunConfig(BaseModel):
    """完整运行配置"""

    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, ge=0, description="顶层随机种子，所有随机性由此派生")
    precision: Literal["float32", "float64"] = Field(default="float32", description="参数与激活精度")
    model: ModelConfig = Field(default_factory=ModelConfig)
    optim: OptimConfig = Field(default_factory=OptimConfig)
    loss: LossConfig = Field(default_factory=LossConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)

    @model_validator(mode="after")
    def _single_seed(self):
        if self.optim.seed is not None and self.optim.seed != self.seed:
            raise ValueError("optim.seed 与顶层 seed 不一致")
        return self

    @property
    def dtype(self):
        return np.float32 if self.precision == "float32" else np.float64

    def resolved(self) -> dict:
        return self.model_dump(mode="json")


def _format_errors(error: ValidationError) -> List[str]:
    return [f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in error.errors()]


def parse_run_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        errors = _format_errors(e)
        raise ConfigurationError(f"运行配置无效: {'; '.join(errors)}", errors=errors) from e


def load_run_config(path: Optional[PathLike]) -> RunConfig:
    """
    读取 JSON 运行配置；path 为 None 时使用全部默认值。

    Raises:
        ConfigurationError: 文件不存在、不是合法 JSON、含未知键或取值非法
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"配置文件不存在: {path}", path=str(path))
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"配置文件不是合法 JSON: {e}", path=str(path)) from e
    if not isinstance(data, dict):
        raise ConfigurationError("配置文件顶层必须是对象", path=str(path))
    return parse_run_config(data)


def write_resolved_config(config: RunConfig, output_dir: PathLike) -> Path:
    """把展开默认值后的配置写到输出目录"""
    path = Path(output_dir) / RESOLVED_CONFIG
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(config.resolved(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
