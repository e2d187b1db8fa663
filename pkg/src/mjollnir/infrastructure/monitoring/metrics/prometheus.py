"""
Prometheus指标模块 - 训练过程指标
训练结束后以 textfile 格式写出，供 node-exporter 收集
"""

from typing import Dict

from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile

# 创建指标注册表
REGISTRY = CollectorRegistry()

# ======================
# 训练指标
# ======================

TRAIN_STEPS_TOTAL = Counter(
    "mjollnir_train_steps_total",
    "优化器步数总数",
    registry=REGISTRY,
)

SAMPLES_PROCESSED_TOTAL = Counter(
    "mjollnir_samples_processed_total",
    "处理的样本(天)总数",
    ["split"],
    registry=REGISTRY,
)

TRAIN_LOSS = Gauge(
    "mjollnir_train_loss",
    "最近一个轮次的平均损失",
    ["split", "component"],
    registry=REGISTRY,
)

BEST_VAL_LOSS = Gauge(
    "mjollnir_best_val_loss",
    "迄今最优验证损失",
    registry=REGISTRY,
)

EPOCH_DURATION = Histogram(
    "mjollnir_epoch_duration_seconds",
    "训练轮次耗时(秒)",
    buckets=(1.0, 5.0, 15.0, 60.0, 300.0, 900.0, 3600.0, float("inf")),
    registry=REGISTRY,
)


def record_step(batch_size: int) -> None:
    """记录一次优化器步"""
    TRAIN_STEPS_TOTAL.inc()
    SAMPLES_PROCESSED_TOTAL.labels(split="train").inc(batch_size)


def record_epoch(
    train: Dict[str, float],
    val: Dict[str, float],
    best_val_loss: float,
    duration_s: float,
    val_samples: int,
) -> None:
    """记录一个轮次的汇总指标"""
    for split, breakdown in (("train", train), ("val", val)):
        for component in ("total", "cls", "reg"):
            if component in breakdown:
                TRAIN_LOSS.labels(split=split, component=component).set(breakdown[component])
    SAMPLES_PROCESSED_TOTAL.labels(split="val").inc(val_samples)
    BEST_VAL_LOSS.set(best_val_loss)
    EPOCH_DURATION.observe(duration_s)


def write_metrics_textfile(path: str) -> None:
    """以 textfile 格式写出当前注册表"""
    write_to_textfile(path, REGISTRY)


def get_registry() -> CollectorRegistry:
    """获取指标注册表"""
    return REGISTRY
