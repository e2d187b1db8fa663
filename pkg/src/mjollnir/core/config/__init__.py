"""
配置模块

进程设置（环境变量，仅输出相关）与运行配置（JSON 文件，全部数值超参数）。
"""

from mjollnir.core.config.settings import LogFormat, LogLevel, MjollnirSettings, get_settings, load_settings, reset_settings
from mjollnir.core.config.run_config import (
    RESOLVED_CONFIG,
    DataConfig,
    EvaluationConfig,
    PathsConfig,
    RunConfig,
    load_run_config,
    parse_run_config,
    write_resolved_config,
)

__all__ = [
    "LogFormat",
    "LogLevel",
    "MjollnirSettings",
    "get_settings",
    "load_settings",
    "reset_settings",
    "RESOLVED_CONFIG",
    "DataConfig",
    "EvaluationConfig",
    "PathsConfig",
    "RunConfig",
    "load_run_config",
    "parse_run_config",
    "write_resolved_config",
]
