"""
测试运行配置与进程设置
"""

import json

import numpy as np
import pytest

from mjollnir.core.config import RunConfig, load_run_config, write_resolved_config
from mjollnir.core.config.settings import LogFormat, LogLevel, get_settings, load_settings
from mjollnir.core.exceptions import ConfigurationError


class TestRunConfig:
    """运行配置测试"""

    def test_defaults(self):
        """测试缺省路径时使用全部默认值"""
        config = load_run_config(None)
        assert config.seed == 0
        assert config.dtype == np.float32
        assert config.model.stage_depths == (3, 3, 27, 3)
        assert config.data.grid.dims == (120, 360)
        assert config.evaluation.threshold == 0.5

    def test_partial_file(self, tiny_run_config_path):
        """测试部分字段覆盖，其余取默认值"""
        config = load_run_config(tiny_run_config_path)
        assert config.seed == 3
        assert config.optim.epochs == 2
        assert config.optim.beta2 == 0.999
        assert config.data.grid.dims == (6, 18)
        assert config.data.train_years == (2010, 2010)

    @pytest.mark.parametrize("payload", [
        {"bogus": 1},
        {"model": {"stage_widths": [8, 8, 8]}},
        {"optim": {"epochs": 0}},
        {"data": {"train_years": [2016, 2010]}},
        {"evaluation": {"schemes": {"Atlantis": "quadrants"}}},
        {"seed": 1, "optim": {"seed": 2}},
        [1, 2, 3],
    ])
    def test_invalid_files(self, tmp_path, payload):
        """测试未知键、非法取值与非对象顶层"""
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(payload), encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_run_config(path)

    def test_missing_and_malformed(self, tmp_path):
        """测试文件不存在或不是合法 JSON"""
        with pytest.raises(ConfigurationError):
            load_run_config(tmp_path / "none.json")
        broken = tmp_path / "broken.json"
        broken.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_run_config(broken)

    def test_resolved_round_trip(self, tmp_path, tiny_run_config_path):
        """测试展开后的配置可以重新加载为相同配置"""
        config = load_run_config(tiny_run_config_path)
        path = write_resolved_config(config, tmp_path / "out")
        assert load_run_config(path) == config
        assert RunConfig.model_validate(json.loads(path.read_text(encoding="utf-8"))) == config


class TestSettings:
    """进程设置测试"""

    def test_defaults(self):
        """测试默认输出设置"""
        settings = get_settings()
        assert settings.log_level == LogLevel.INFO
        assert settings.log_format == LogFormat.JSON
        assert settings.progress is False

    def test_environment_override(self, monkeypatch):
        """测试 MJOLLNIR_ 前缀环境变量"""
        monkeypatch.setenv("MJOLLNIR_LOG_LEVEL", "DEBUG")
        monkeypatch.setenv("MJOLLNIR_PROGRESS", "true")
        settings = load_settings()
        assert settings.log_level == LogLevel.DEBUG
        assert settings.progress is True

    def test_env_file(self, tmp_path, monkeypatch):
        """测试从 dotenv 文件加载"""
        monkeypatch.setenv("MJOLLNIR_LOG_FORMAT", "json")
        monkeypatch.delenv("MJOLLNIR_LOG_FORMAT")
        env = tmp_path / "test.env"
        env.write_text("MJOLLNIR_LOG_FORMAT=text\n", encoding="utf-8")
        assert load_settings(str(env)).log_format == LogFormat.TEXT


def _load_validator():
    import importlib.util
    from pathlib import Path

    path = Path(__file__).resolve().parents[3] / "scripts" / "config_validator.py"
    module_spec = importlib.util.spec_from_file_location("config_validator", path)
    module = importlib.util.module_from_spec(module_spec)
    module_spec.loader.exec_module(module)
    return module


class TestConfigValidatorScript:
    """配置验证脚本测试"""

    def test_valid_and_invalid(self, tmp_path, tiny_run_config_path, capsys):
        """测试有效配置打印展开结果，无效配置返回 1"""
        validator = _load_validator()
        assert validator.main([str(tiny_run_config_path)]) == 0
        assert json.loads(capsys.readouterr().out)["seed"] == 3
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"optim": {"epochs": 0}}), encoding="utf-8")
        assert validator.main([str(bad), "--quiet"]) == 1
        assert "optim.epochs" in capsys.readouterr().err
