"""
配置管理模块 - 进程级设置

只承载输出相关的设置（日志级别、日志格式、日志文件、进度条），
数值型超参数一律放在运行配置文件中（见 run_config.py）。
"""

from enum import Enum
from typing import Optional

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict


class LogLevel(str, Enum):
    """日志级别"""
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class LogFormat(str, Enum):
    """日志格式"""
    JSON = "json"
    TEXT = "text"


class MjollnirSettings(BaseSettings):
    """Mjöllnir 进程设置，环境变量前缀 MJOLLNIR_"""

    model_config = SettingsConfigDict(
        env_prefix="MJOLLNIR_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    log_level: LogLevel = LogLevel.INFO
    log_format: LogFormat = LogFormat.JSON
    log_file: Optional[str] = None
    progress: bool = False


def load_settings(env_file: Optional[str] = None) -> MjollnirSettings:
    """加载配置设置"""
    if env_file:
        load_dotenv(env_file)
    return MjollnirSettings()


# 全局配置实例
_settings_instance: Optional[MjollnirSettings] = None


def get_settings() -> MjollnirSettings:
    """获取全局配置实例"""
    global _settings_instance
    if _settings_instance is None:
        _settings_instance = load_settings()
    return _settings_instance


def reset_settings() -> None:
    """丢弃缓存的配置实例（测试中修改环境变量后使用）"""
    global _settings_instance
    _settings_instance = None
