"""
监控集成测试：结构化日志上下文与 Prometheus textfile 输出
"""

import json
import logging

import pytest

from mjollnir.infrastructure.monitoring.logging import (
    clear_run_context,
    get_logger,
    log_artifact,
    log_command,
    log_epoch,
    set_run_context,
    setup_structured_logging,
)
from mjollnir.infrastructure.monitoring.metrics import (
    get_registry,
    record_epoch,
    record_step,
    write_metrics_textfile,
)


@pytest.fixture
def log_file(tmp_path):
    path = tmp_path / "logs" / "run.jsonl"
    setup_structured_logging(log_level="INFO", log_format="json", log_file=str(path))
    yield path
    clear_run_context()
    root = logging.getLogger()
    for handler in root.handlers[:]:
        handler.close()
        root.removeHandler(handler)


def read_entries(path):
    for handler in logging.getLogger().handlers:
        handler.flush()
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


class TestStructuredLogging:
    """结构化日志测试"""

    def test_run_context_fields(self, log_file):
        """测试 JSON 日志带运行 ID、子命令、轮次与自定义字段"""
        set_run_context(run_id="abc123", command="train", epoch=2)
        get_logger("mjollnir.test").info("批次完成", extra={"batch": 7})
        entry = read_entries(log_file)[-1]
        assert entry["message"] == "批次完成"
        assert entry["run_id"] == "abc123"
        assert entry["command"] == "train"
        assert entry["epoch"] == 2
        assert entry["batch"] == 7
        assert entry["level"] == "INFO"

    def test_context_cleared(self, log_file):
        """测试清除上下文后不再附带运行字段"""
        set_run_context(run_id="r1", command="stats")
        clear_run_context()
        get_logger("mjollnir.test").info("无上下文")
        entry = read_entries(log_file)[-1]
        assert "run_id" not in entry and "epoch" not in entry

    def test_event_helpers(self, log_file):
        """测试轮次、命令与产物事件"""
        log_epoch(1, {"total": 1.5}, {"total": 1.2}, 1.2, 0.25, True)
        log_command("train", False, 12.0, 2, {"type": "ConfigurationError", "message": "bad"})
        log_artifact("checkpoint", "/tmp/best.ckpt", epoch=1)
        events = {e["event"]: e for e in read_entries(log_file)}
        assert events["epoch_end"]["val"] == {"total": 1.2}
        assert events["epoch_end"]["improved"] is True
        assert events["command"]["exit_code"] == 2
        assert events["command"]["level"] == "ERROR"
        assert events["artifact"]["kind"] == "checkpoint"

    def test_level_filter(self, tmp_path):
        """测试日志级别过滤"""
        path = tmp_path / "warn.jsonl"
        setup_structured_logging(log_level="WARNING", log_format="json", log_file=str(path))
        try:
            logger = get_logger("mjollnir.test")
            logger.info("被过滤")
            logger.warning("保留")
            assert [e["message"] for e in read_entries(path)] == ["保留"]
        finally:
            root = logging.getLogger()
            for handler in root.handlers[:]:
                handler.close()
                root.removeHandler(handler)


class TestMetrics:
    """训练指标测试"""

    def test_step_and_epoch_metrics(self, tmp_path):
        """测试步数、样本数与损失指标，以及 textfile 输出"""
        registry = get_registry()
        before = registry.get_sample_value("mjollnir_train_steps_total") or 0.0
        samples = registry.get_sample_value("mjollnir_samples_processed_total", {"split": "train"}) or 0.0
        record_step(4)
        record_step(3)
        record_epoch({"total": 2.0, "cls": 0.5, "reg": 1.5}, {"total": 1.75}, 1.75, 3.0, 4)
        assert registry.get_sample_value("mjollnir_train_steps_total") == before + 2
        assert registry.get_sample_value("mjollnir_samples_processed_total", {"split": "train"}) == samples + 7
        assert registry.get_sample_value("mjollnir_train_loss", {"split": "train", "component": "reg"}) == 1.5
        assert registry.get_sample_value("mjollnir_best_val_loss") == 1.75

        path = tmp_path / "metrics.prom"
        write_metrics_textfile(str(path))
        text = path.read_text(encoding="utf-8")
        assert "mjollnir_epoch_duration_seconds_bucket" in text
        assert 'mjollnir_train_loss{split="val",component="total"} 1.75' in text
