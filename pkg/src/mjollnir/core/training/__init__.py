"""
训练：AdamW、学习率调度与训练循环
"""

from mjollnir.core.training.optimizer import OptimConfig, OptimState, adamw_step, clip_grad_norm, lr_at
from mjollnir.core.training.trainer import (
    BEST_CHECKPOINT,
    FINAL_CHECKPOINT,
    METRICS_LOG,
    LossSummary,
    TrainResult,
    evaluate_split,
    train,
    train_step,
)

__all__ = [
    "OptimConfig",
    "OptimState",
    "adamw_step",
    "clip_grad_norm",
    "lr_at",
    "BEST_CHECKPOINT",
    "FINAL_CHECKPOINT",
    "METRICS_LOG",
    "LossSummary",
    "TrainResult",
    "evaluate_split",
    "train",
    "train_step",
]
