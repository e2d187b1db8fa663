"""
结构化日志模块 - 提供JSON格式的结构化日志记录
支持运行ID、子命令、训练轮次等上下文信息
"""

import json
import logging
import os
import sys
from contextvars import ContextVar
from datetime import datetime, timezone
from typing import Any, Dict, Optional

# 上下文变量用于存储运行相关信息
run_id_var: ContextVar[Optional[str]] = ContextVar("run_id", default=None)
command_var: ContextVar[Optional[str]] = ContextVar("command", default=None)
epoch_var: ContextVar[Optional[int]] = ContextVar("epoch", default=None)

_RESERVED_ATTRS = frozenset([
    "name", "levelno", "levelname", "pathname", "filename", "module", "lineno",
    "funcName", "created", "msecs", "relativeCreated", "thread", "threadName",
    "processName", "process", "exc_info", "exc_text", "stack_info", "msg", "args",
    "extra", "taskName", "message", "asctime",
])


class StructuredFormatter(logging.Formatter):
    """结构化日志格式化器"""

    def format(self, record):
        log_entry: Dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno,
        }

        if run_id_var.get():
            log_entry["run_id"] = run_id_var.get()
        if command_var.get():
            log_entry["command"] = command_var.get()
        if epoch_var.get() is not None:
            log_entry["epoch"] = epoch_var.get()

        if record.exc_info:
            log_entry["exception"] = self.formatException(record.exc_info)

        # 从record中提取其他自定义属性
        for key, value in record.__dict__.items():
            if key not in _RESERVED_ATTRS and key not in log_entry:
                log_entry[key] = value

        return json.dumps(log_entry, ensure_ascii=False, default=str)


class ContextualAdapter(logging.LoggerAdapter):
    """带上下文的日志适配器"""

    def process(self, msg, kwargs):
        extra = dict(kwargs.get("extra") or {})
        if run_id_var.get():
            extra.setdefault("run_id", run_id_var.get())
        if command_var.get():
            extra.setdefault("command", command_var.get())
        kwargs["extra"] = extra
        return msg, kwargs


def setup_structured_logging(
    log_level: Optional[str] = None,
    log_format: Optional[str] = None,
    log_file: Optional[str] = None,
) -> None:
    """
    配置结构化日志

    Args:
        log_level: 日志级别 (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_format: 日志格式 ('json' 或 'text')
        log_file: 日志文件路径 (可选)
    """
    from mjollnir.core.config.settings import get_settings

    settings = get_settings()
    log_level = (log_level or settings.log_level.value).upper()
    log_format = (log_format or settings.log_format.value).lower()
    log_file = log_file or settings.log_file

    root_logger = logging.getLogger()
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    if log_format == "json":
        formatter: logging.Formatter = StructuredFormatter()
    else:
        formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")

    # 日志写到 stderr，stdout 留给命令输出
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    if log_file:
        log_dir = os.path.dirname(log_file)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setFormatter(formatter)
        root_logger.addHandler(file_handler)

    root_logger.setLevel(getattr(logging, log_level))

    logging.getLogger("matplotlib").setLevel(logging.WARNING)


def get_logger(name: str) -> ContextualAdapter:
    """
    获取带上下文的日志记录器

    Args:
        name: 日志记录器名称

    Returns:
        ContextualAdapter: 带上下文的日志适配器
    """
    return ContextualAdapter(logging.getLogger(name), {})


def set_run_context(
    run_id: Optional[str] = None,
    command: Optional[str] = None,
    epoch: Optional[int] = None,
) -> None:
    """设置运行上下文信息"""
    if run_id:
        run_id_var.set(run_id)
    if command:
        command_var.set(command)
    if epoch is not None:
        epoch_var.set(epoch)


def clear_run_context() -> None:
    """清除运行上下文信息"""
    run_id_var.set(None)
    command_var.set(None)
    epoch_var.set(None)


def log_epoch(
    epoch: int,
    train: Dict[str, float],
    val: Dict[str, float],
    best_val_loss: float,
    wall_time_s: float,
    improved: bool,
) -> None:
    """记录每个训练轮次的结构化日志"""
    logger = get_logger("trainer.epoch")
    logger.info(f"训练轮次完成: {epoch}", extra={
        "event": "epoch_end",
        "epoch": epoch,
        "train": train,
        "val": val,
        "best_val_loss": best_val_loss,
        "improved": improved,
        "wall_time_s": round(wall_time_s, 3),
    })


def log_command(
    command: str,
    success: bool,
    duration_ms: float,
    exit_code: int,
    error: Optional[Dict[str, Any]] = None,
) -> None:
    """记录子命令执行日志"""
    logger = get_logger("cli.command")
    extra: Dict[str, Any] = {
        "event": "command",
        "command_name": command,
        "success": success,
        "duration_ms": round(duration_ms, 1),
        "exit_code": exit_code,
    }
    if error:
        extra["error"] = error

    if success:
        logger.info(f"命令执行成功: {command}", extra=extra)
    else:
        logger.error(f"命令执行失败: {command}", extra=extra)


def log_artifact(kind: str, path: str, **fields: Any) -> None:
    """记录产物写出"""
    logger = get_logger("artifact")
    logger.info(f"写出产物: {kind}", extra={"event": "artifact", "kind": kind, "path": path, **fields})
