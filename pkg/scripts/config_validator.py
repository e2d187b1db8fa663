#!/usr/bin/env python3
"""
配置验证工具 - Mjöllnir

独立的配置验证脚本，检查运行配置 JSON 与 MJOLLNIR_ 环境变量设置，
并打印展开默认值后的完整配置。
"""

import argparse
import json
import sys
from pathlib import Path

# 添加src到Python路径
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from mjollnir.core.config import load_run_config, load_settings
from mjollnir.core.exceptions import ConfigurationError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Mjöllnir 配置验证工具")
    parser.add_argument("configs", nargs="*", help="运行配置 JSON 文件（不给出时验证默认配置）")
    parser.add_argument("--env-file", default=None, help="环境变量文件路径")
    parser.add_argument("--quiet", action="store_true", help="只输出验证结果，不打印展开后的配置")
    args = parser.parse_args(argv)

    print("⚡ Mjöllnir 配置验证工具", file=sys.stderr)
    print("=" * 50, file=sys.stderr)

    try:
        settings = load_settings(args.env_file)
    except Exception as e:
        print(f"❌ 进程设置无效: {e}", file=sys.stderr)
        return 1
    print(f"✅ 进程设置: 日志级别 {settings.log_level.value}, 格式 {settings.log_format.value}", file=sys.stderr)

    failures = 0
    for path in args.configs or [None]:
        label = path or "<默认配置>"
        try:
            config = load_run_config(path)
        except ConfigurationError as e:
            failures += 1
            print(f"❌ {label}: {e.message}", file=sys.stderr)
            for error in e.details.get("errors", []):
                print(f"   - {error}", file=sys.stderr)
            continue
        print(f"✅ {label}", file=sys.stderr)
        if not args.quiet:
            print(json.dumps(config.resolved(), indent=2, sort_keys=True))

    if failures:
        print(f"\n❌ {failures} 个配置文件无效", file=sys.stderr)
        return 1
    print("\n🎉 全部配置有效", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
