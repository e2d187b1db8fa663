"""
Mjöllnir 命令行入口

退出码：0 成功，1 运行时失败，2 用法/配置错误。
环境变量只影响输出（MJOLLNIR_LOG_LEVEL、MJOLLNIR_LOG_FORMAT、MJOLLNIR_LOG_FILE、MJOLLNIR_PROGRESS）。
"""

import argparse
import sys
import time
import uuid
from typing import List, Optional

from pydantic import ValidationError

from mjollnir import __version__
from mjollnir.core.config.settings import load_settings, reset_settings
from mjollnir.core.exceptions import ConfigurationError, MjollnirError
from mjollnir.infrastructure.monitoring.logging import (
    clear_run_context,
    get_logger,
    log_command,
    set_run_context,
    setup_structured_logging,
)
from mjollnir.interfaces.cli import commands

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mjollnir", description="Mjöllnir 全球闪电密度参数化")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--env-file", default=None, help="输出设置的 dotenv 文件")
    parser.add_argument("--log-level", default=None, help="覆盖 MJOLLNIR_LOG_LEVEL")
    parser.add_argument("--log-format", choices=["json", "text"], default=None, help="覆盖 MJOLLNIR_LOG_FORMAT")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str, config: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.set_defaults(func=func)
        if config:
            p.add_argument("--config", default=None, help="运行配置 JSON（缺省为全部默认值）")
        return p

    p = add("synth", commands.cmd_synth, "生成合成数据集")
    p.add_argument("--out", required=True, help="输出 MGRID 文件")
    p.add_argument("--years", default="2010-2018", help="年份范围，如 2010-2018 或 2016,2017")
    p.add_argument("--resolution", type=float, default=None, help="覆盖网格格距（度）")
    p.add_argument("--seed", type=int, default=None, help="覆盖配置中的 seed")
    p.add_argument("--noise", type=float, default=0.1, help="噪声强度")
    p.add_argument("--force", action="store_true", help="覆盖已有输出")

    p = add("convert-check", commands.cmd_convert_check, "校验 MGRID 文件并输出摘要")
    p.add_argument("dataset", help="MGRID 文件")
    p.add_argument("--strict-grid", action="store_true", help="要求网格与配置完全一致")

    p = add("stats", commands.cmd_stats, "在训练年份上计算标准化统计量与异常阈值")
    p.add_argument("--dataset", default=None)
    p.add_argument("--out", default=None, help="统计量 JSON")
    p.add_argument("--force", action="store_true")

    p = add("train", commands.cmd_train, "训练模型")
    p.add_argument("--dataset", default=None)
    p.add_argument("--stats", default=None)
    p.add_argument("--out", default=None, help="输出目录")
    p.add_argument("--resume", action="store_true", help="从输出目录中的 final.ckpt 续训")
    p.add_argument("--force", action="store_true")

    p = add("predict", commands.cmd_predict, "用检查点生成逐日预测")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--stats", default=None)
    p.add_argument("--out", required=True, help="输出 MGRID 文件")
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--dates", default=None, help="日期范围 YYYY-MM-DD:YYYY-MM-DD（优先于 --split）")
    p.add_argument("--mode", choices=["gated", "expected"], default=None)
    p.add_argument("--threshold", type=float, default=None, help="gated 模式的 τ")
    p.add_argument("--force", action="store_true")

    p = add("evaluate", commands.cmd_evaluate, "计算评估诊断")
    p.add_argument("--predictions", required=True)
    p.add_argument("--observations", required=True)
    p.add_argument("--out", required=True, help="输出目录")
    p.add_argument("--force", action="store_true")

    p = add("report", commands.cmd_report, "从评估目录渲染 SVG 图", config=False)
    p.add_argument("--evaluation", required=True, help="evaluate 的输出目录")
    p.add_argument("--out", required=True, help="图输出目录")
    p.add_argument("--force", action="store_true")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    if args.env_file:
        reset_settings()
        load_settings(args.env_file)
    setup_structured_logging(log_level=args.log_level, log_format=args.log_format)
    set_run_context(run_id=uuid.uuid4().hex[:12], command=args.command)

    started = time.perf_counter()
    code = EXIT_OK
    error = None
    try:
        code = args.func(args)
    except (ConfigurationError, ValidationError, FileNotFoundError, FileExistsError) as e:
        code = EXIT_USAGE
        error = e.to_dict() if isinstance(e, MjollnirError) else {"type": type(e).__name__, "message": str(e)}
    except MjollnirError as e:
        code = EXIT_RUNTIME
        error = e.to_dict()
    except Exception as e:  # noqa: BLE001
        code = EXIT_RUNTIME
        error = {"type": type(e).__name__, "message": str(e)}
        logger.exception("未预期的错误")
    finally:
        log_command(args.command, code == EXIT_OK, (time.perf_counter() - started) * 1000, code, error)
        clear_run_context()

    if error:
        sys.stderr.write(f"mjollnir {args.command}: {error['message']}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
