"""
训练循环

每轮：按轮次种子打乱训练天 → 逐批前向/反向/AdamW → 验证集损失 →
保留验证损失最低的检查点 → 写 NDJSON 记录与结构化日志。
损失记录与检查点只包含确定性内容；墙钟时间只进入日志与监控指标。
"""

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Collection, Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from mjollnir.core.data import Batch, BatchLoader, DatasetSplits, GridDataset, NormStats, batch_indices
from mjollnir.core.data.normalization import compute_anomaly_threshold
from mjollnir.core.exceptions import ConfigurationError, EmptyMaskError, TrainingError
from mjollnir.core.loss import LossBreakdown, LossConfig, total_loss
from mjollnir.core.nn import (
    ModelConfig,
    ModelParams,
    forward,
    init_params,
    load_checkpoint,
    no_decay_names,
    save_checkpoint,
)
from mjollnir.core.tensor import no_grad
from mjollnir.core.training.optimizer import OptimConfig, OptimState, adamw_step, clip_grad_norm, lr_at
from mjollnir.infrastructure.monitoring.logging import get_logger, log_artifact, log_epoch, set_run_context
from mjollnir.infrastructure.monitoring.metrics import record_epoch, record_step

logger = get_logger(__name__)

BEST_CHECKPOINT = "best.ckpt"
FINAL_CHECKPOINT = "final.ckpt"
METRICS_LOG = "metrics.ndjson"

# drop path 随机流的种子分量
_DROP_PATH_STREAM = 7


@dataclass
class LossSummary:
    """按有效像素数加权的平均损失"""

    total: float = 0.0
    cls: float = 0.0
    reg: float = 0.0
    valid: int = 0
    positive: int = 0
    anomaly: int = 0
    batches: int = 0

    def add(self, breakdown: LossBreakdown) -> None:
        n = breakdown.valid_count
        self.total += breakdown.total_value * n
        self.cls += breakdown.cls * n
        self.reg += breakdown.reg * n
        self.valid += n
        self.positive += breakdown.positive_count
        self.anomaly += breakdown.anomaly_count
        self.batches += 1

    def as_dict(self) -> Dict[str, Any]:
        denom = max(self.valid, 1)
        return {
            "total": self.total / denom,
            "cls": self.cls / denom,
            "reg": self.reg / denom,
            "valid": self.valid,
            "positive": self.positive,
            "anomaly": self.anomaly,
            "batches": self.batches,
        }


@dataclass
class TrainResult:
    params: ModelParams
    state: OptimState
    loss_config: LossConfig
    history: List[Dict[str, Any]] = field(default_factory=list)
    best_val_loss: float = math.inf
    best_epoch: int = 0
    best_checkpoint: Optional[Path] = None
    final_checkpoint: Optional[Path] = None


def train_step(
    params: ModelParams,
    batch: Batch,
    state: OptimState,
    optim_config: OptimConfig,
    loss_config: LossConfig,
    lr: Optional[float] = None,
    decay_exclude: Collection[str] = (),
    rng: Optional[np.random.Generator] = None,
    norm_eps: float = 1e-6,
) -> LossBreakdown:
    """单步：前向 → 损失 → 反向 → [梯度裁剪] → AdamW"""
    named = params.as_dict()
    for t in named.values():
        t.requires_grad = True
        t.zero_grad()
    logits, magnitudes = forward(params, batch.x, training=True, rng=rng, eps=norm_eps)
    breakdown = total_loss(logits, magnitudes, batch.y, batch.mask, loss_config)
    breakdown.total.backward()
    grads = {name: t.grad for name, t in named.items()}
    for name, g in grads.items():
        if g is None:
            raise TrainingError(f"参数 {name} 未得到梯度", parameter=name)
    if optim_config.max_grad_norm is not None:
        clip_grad_norm(grads, optim_config.max_grad_norm)
    adamw_step(named, grads, state, optim_config, lr=lr, decay_exclude=decay_exclude)
    for t in named.values():
        t.zero_grad()
    return breakdown


def evaluate_split(
    params: ModelParams,
    dataset: GridDataset,
    indices: Sequence[int],
    stats: NormStats,
    loss_config: LossConfig,
    batch_size: int = 8,
    dtype=np.float32,
    prefetch: int = 2,
    norm_eps: float = 1e-6,
) -> LossSummary:
    """评估模式下计算一个划分上的平均损失"""
    summary = LossSummary()
    loader = BatchLoader(dataset, batch_indices(list(indices), batch_size), stats, dtype, prefetch)
    with no_grad():
        for batch in loader:
            logits, magnitudes = forward(params, batch.x, training=False, eps=norm_eps)
            try:
                summary.add(total_loss(logits, magnitudes, batch.y, batch.mask, loss_config))
            except EmptyMaskError:
                logger.warning("批次没有有效像素，已跳过", extra={"dates": [d.isoformat() for d in batch.dates]})
    return summary


def _write_history(path: Path, history: List[Dict[str, Any]]) -> None:
    lines = [json.dumps(record, sort_keys=True) for record in history]
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def _read_history(path: Path, epochs: int) -> List[Dict[str, Any]]:
    if not path.exists():
        return []
    records = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    return records[:epochs]


def train(
    model_config: ModelConfig,
    optim_config: OptimConfig,
    dataset: GridDataset,
    splits: DatasetSplits,
    stats: NormStats,
    loss_config: LossConfig,
    output_dir: Path,
    seed: int = 0,
    dtype=np.float32,
    resume: bool = False,
    prefetch: int = 2,
    progress: bool = False,
) -> TrainResult:
    """
    训练并在 output_dir 写出 best.ckpt、final.ckpt 与 metrics.ndjson。

    resume=True 时从 final.ckpt 继续（恢复参数、优化器矩、步数与最佳验证损失），
    结果与不中断的运行逐位一致。

    Raises:
        ConfigurationError: 训练集或验证集为空
    """
    if not splits.train:
        raise ConfigurationError("训练集为空")
    if not splits.val:
        raise ConfigurationError("验证集为空")
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    seed = optim_config.seed if optim_config.seed is not None else seed

    if loss_config.anomaly_threshold is None:
        threshold = compute_anomaly_threshold(dataset, splits.train, loss_config.quantile, loss_config.threshold_positive_only)
        loss_config = loss_config.model_copy(update={"anomaly_threshold": threshold})
        logger.info("异常阈值由训练集计算", extra={"anomaly_threshold": threshold, "quantile": loss_config.quantile})

    params = init_params(model_config, seed=seed, dtype=dtype)
    state = OptimState.zeros(params.as_dict())
    start_epoch = 0
    best_val = math.inf
    best_epoch = 0
    best_path = output_dir / BEST_CHECKPOINT
    final_path = output_dir / FINAL_CHECKPOINT
    history_path = output_dir / METRICS_LOG
    history: List[Dict[str, Any]] = []

    if resume:
        ckpt = load_checkpoint(final_path)
        if ckpt.config != model_config:
            raise ConfigurationError("续训检查点的模型配置与当前配置不一致")
        params = ckpt.params
        if ckpt.optimizer is None:
            raise ConfigurationError("续训检查点不含优化器状态")
        state = OptimState.from_snapshot(ckpt.optimizer)
        start_epoch = int(ckpt.metadata["epoch"])
        best_val = float(ckpt.metadata["best_val_loss"])
        best_epoch = int(ckpt.metadata["best_epoch"])
        loss_config = loss_config.model_copy(update={"anomaly_threshold": ckpt.metadata["anomaly_threshold"]})
        history = _read_history(history_path, start_epoch)
        logger.info("从检查点续训", extra={"path": str(final_path), "epoch": start_epoch, "step": state.t})

    decay_exclude = set(no_decay_names(params))
    steps_per_epoch = math.ceil(len(splits.train) / optim_config.batch_size)
    total_steps = steps_per_epoch * optim_config.epochs
    train_indices = np.asarray(splits.train)

    for epoch in range(start_epoch, optim_config.epochs):
        set_run_context(epoch=epoch + 1)
        started = time.perf_counter()
        order = np.random.default_rng([seed, epoch]).permutation(train_indices)
        loader = BatchLoader(dataset, batch_indices(order.tolist(), optim_config.batch_size), stats, dtype, prefetch)
        summary = LossSummary()
        lr = optim_config.lr
        for step, batch in enumerate(tqdm(loader, desc=f"epoch {epoch + 1}", disable=not progress, leave=False)):
            lr = lr_at(optim_config, epoch * steps_per_epoch + step, total_steps)
            rng = np.random.default_rng([seed, epoch, step, _DROP_PATH_STREAM])
            try:
                breakdown = train_step(params, batch, state, optim_config, loss_config, lr, decay_exclude, rng, model_config.norm_eps)
            except EmptyMaskError:
                logger.warning("批次没有有效像素，已跳过", extra={"dates": [d.isoformat() for d in batch.dates]})
                continue
            summary.add(breakdown)
            record_step(batch.size)

        val = evaluate_split(params, dataset, splits.val, stats, loss_config, optim_config.batch_size, dtype, prefetch, model_config.norm_eps)
        if val.valid == 0:
            raise ConfigurationError("验证集没有有效像素")
        val_loss = val.as_dict()["total"]
        improved = val_loss < best_val
        metadata = {
            "epoch": epoch + 1,
            "seed": seed,
            "anomaly_threshold": loss_config.anomaly_threshold,
            "val_loss": val_loss,
        }
        if improved:
            best_val, best_epoch = val_loss, epoch + 1
            save_checkpoint(best_path, model_config, params, metadata={**metadata, "best_val_loss": best_val, "best_epoch": best_epoch})
            log_artifact("checkpoint", str(best_path), epoch=epoch + 1, best=True)
        save_checkpoint(
            final_path, model_config, params, optimizer=state.snapshot(),
            metadata={**metadata, "best_val_loss": best_val, "best_epoch": best_epoch},
        )

        record = {
            "epoch": epoch + 1,
            "step": state.t,
            "lr": lr,
            "train": summary.as_dict(),
            "val": val.as_dict(),
            "best_val_loss": best_val,
            "best_epoch": best_epoch,
            "improved": improved,
        }
        history.append(record)
        _write_history(history_path, history)

        wall = time.perf_counter() - started
        log_epoch(epoch + 1, summary.as_dict(), val.as_dict(), best_val, wall, improved)
        record_epoch(summary.as_dict(), val.as_dict(), best_val, wall, len(splits.val))

    return TrainResult(
        params=load_checkpoint(final_path).params,
        state=state,
        loss_config=loss_config,
        history=history,
        best_val_loss=best_val,
        best_epoch=best_epoch,
        best_checkpoint=best_path if best_path.exists() else None,
        final_checkpoint=final_path,
    )
