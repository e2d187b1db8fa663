"""
多任务损失
"""

from mjollnir.core.loss.multitask import (
    LossBreakdown,
    LossConfig,
    anomaly_threshold,
    masked_bce,
    masked_log_mse,
    occurrence_target,
    total_loss,
)

__all__ = [
    "LossBreakdown",
    "LossConfig",
    "anomaly_threshold",
    "masked_bce",
    "masked_log_mse",
    "occurrence_target",
    "total_loss",
]
