"""
子命令实现

每个命令接收 argparse 命名空间，成功返回 0；失败通过异常交给 main 映射退出码。
所有输出都不会在没有 --force 的情况下覆盖已有文件。
"""

import json
import sys
from argparse import Namespace
from datetime import date
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from mjollnir.core.config import RunConfig, load_run_config, write_resolved_config
from mjollnir.core.config.settings import get_settings
from mjollnir.core.data import (
    BatchLoader,
    GridSpec,
    MgridWriter,
    NormStats,
    batch_indices,
    compute_anomaly_threshold,
    compute_norm_stats,
    generate_synthetic_dataset,
    load_dataset,
    split_by_year,
)
from mjollnir.core.evaluation import evaluate
from mjollnir.core.evaluation.plotting import render_report
from mjollnir.core.exceptions import AlignmentError, ConfigurationError, DataError
from mjollnir.core.nn import forward, load_checkpoint, predict_density
from mjollnir.core.tensor import no_grad
from mjollnir.core.training import BEST_CHECKPOINT, FINAL_CHECKPOINT, METRICS_LOG, train
from mjollnir.infrastructure.monitoring.logging import get_logger, log_artifact
from mjollnir.infrastructure.monitoring.metrics import write_metrics_textfile

logger = get_logger(__name__)

PREDICTION_CHANNELS = [("logit", "1"), ("magnitude", "flashes km-2 yr-1")]


def _config(args: Namespace) -> RunConfig:
    return load_run_config(getattr(args, "config", None))


def _require(path: Optional[str], what: str) -> Path:
    if not path:
        raise ConfigurationError(f"缺少{what}路径（命令行或配置 paths 中给出）")
    return Path(path)


def _guard_file(path: Path, force: bool) -> None:
    if path.exists() and not force:
        raise FileExistsError(f"输出已存在: {path}（使用 --force 覆盖）")


def _guard_dir(path: Path, names: Iterable[str], force: bool) -> None:
    for name in names:
        _guard_file(path / name, force)


def _emit(payload: Dict[str, Any]) -> None:
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def _years(text: str) -> List[int]:
    try:
        if "-" in text:
            lo, hi = (int(p) for p in text.split("-", 1))
            return list(range(lo, hi + 1))
        return [int(y) for y in text.split(",")]
    except ValueError as e:
        raise ConfigurationError(f"无法解析年份: {text}") from e


# ======================
# synth
# ======================

def cmd_synth(args: Namespace) -> int:
    """生成合成 MGRID 数据集"""
    config = _config(args)
    out = Path(args.out)
    _guard_file(out, args.force)
    grid = config.data.grid
    if args.resolution is not None:
        grid = GridSpec(**{**grid.model_dump(), "resolution": args.resolution})
    seed = config.seed if args.seed is None else args.seed
    generate_synthetic_dataset(out, grid=grid, years=_years(args.years), seed=seed, noise=args.noise)
    log_artifact("dataset", str(out), seed=seed)
    return 0


# ======================
# convert-check
# ======================

def cmd_convert_check(args: Namespace) -> int:
    """校验 MGRID 文件并输出摘要"""
    config = _config(args)
    dataset = load_dataset(args.dataset, config.data.grid if args.strict_grid else None)
    summary = dataset.describe()
    invalid_targets = 0
    masked = 0
    for i in range(len(dataset)):
        sample = dataset[i]
        valid = sample.mask > 0
        masked += int((~valid).sum())
        invalid_targets += int((valid & (sample.target < 0)).sum())
    summary["masked_pixels"] = masked
    summary["negative_valid_targets"] = invalid_targets
    _emit(summary)
    if invalid_targets:
        raise DataError(f"有效像素上存在 {invalid_targets} 个负闪电密度", count=invalid_targets)
    return 0


# ======================
# stats
# ======================

def cmd_stats(args: Namespace) -> int:
    """只在训练年份上计算标准化统计量与异常阈值"""
    config = _config(args)
    out = _require(args.out or config.paths.stats, "统计量输出")
    _guard_file(out, args.force)
    dataset = load_dataset(_require(args.dataset or config.paths.dataset, "数据集"), config.data.grid)
    splits = split_by_year(dataset, config.data.train_years, config.data.val_years, config.data.test_years)
    stats = compute_norm_stats(dataset, splits.train)
    threshold = compute_anomaly_threshold(
        dataset, splits.train, config.loss.quantile, config.loss.threshold_positive_only,
    )
    lo, hi = config.data.train_years
    leaked = [y for y in dataset.accessed_years() if not lo <= y <= hi]
    if leaked:
        raise DataError(f"统计量计算读取了非训练年份: {leaked}", years=leaked)
    stats.save(
        out,
        anomaly_threshold=threshold,
        quantile=config.loss.quantile,
        threshold_positive_only=config.loss.threshold_positive_only,
        train_years=list(config.data.train_years),
        train_days=len(splits.train),
    )
    log_artifact("stats", str(out), anomaly_threshold=threshold, train_days=len(splits.train))
    return 0


def _sidecar_threshold(path: Path, config: RunConfig) -> Optional[float]:
    data = json.loads(path.read_text(encoding="utf-8"))
    if (
        data.get("anomaly_threshold") is not None
        and data.get("quantile") == config.loss.quantile
        and data.get("threshold_positive_only") == config.loss.threshold_positive_only
    ):
        return float(data["anomaly_threshold"])
    return None


# ======================
# train
# ======================

def cmd_train(args: Namespace) -> int:
    """训练并写出 best/final 检查点、NDJSON 损失记录与监控指标"""
    config = _config(args)
    out = _require(args.out or config.paths.output_dir, "输出目录")
    if not args.resume:
        _guard_dir(out, (BEST_CHECKPOINT, FINAL_CHECKPOINT, METRICS_LOG), args.force)
    elif not (out / FINAL_CHECKPOINT).exists():
        raise ConfigurationError(f"无法续训：{out / FINAL_CHECKPOINT} 不存在")

    dataset = load_dataset(_require(args.dataset or config.paths.dataset, "数据集"), config.data.grid)
    stats_path = _require(args.stats or config.paths.stats, "统计量")
    stats = NormStats.load(stats_path)
    splits = split_by_year(dataset, config.data.train_years, config.data.val_years, config.data.test_years)

    loss_config = config.loss
    if loss_config.anomaly_threshold is None:
        threshold = _sidecar_threshold(stats_path, config)
        if threshold is not None:
            loss_config = loss_config.model_copy(update={"anomaly_threshold": threshold})

    out.mkdir(parents=True, exist_ok=True)
    write_resolved_config(config, out)
    result = train(
        config.model,
        config.optim,
        dataset,
        splits,
        stats,
        loss_config,
        out,
        seed=config.seed,
        dtype=config.dtype,
        resume=args.resume,
        prefetch=config.data.prefetch,
        progress=get_settings().progress,
    )
    write_metrics_textfile(str(out / "metrics.prom"))
    test_lo, test_hi = config.data.test_years
    leaked = [y for y in dataset.accessed_years() if test_lo <= y <= test_hi]
    if leaked:
        raise DataError(f"训练过程读取了测试年份: {leaked}", years=leaked)
    log_artifact("checkpoint", str(result.final_checkpoint), best_val_loss=result.best_val_loss, best_epoch=result.best_epoch)
    return 0


# ======================
# predict
# ======================

def _parse_date_range(text: str) -> tuple:
    try:
        start, end = text.split(":", 1)
        return date.fromisoformat(start), date.fromisoformat(end)
    except ValueError as e:
        raise ConfigurationError(f"日期范围格式应为 YYYY-MM-DD:YYYY-MM-DD，实际 {text}") from e


def _select_indices(dataset, config: RunConfig, split: str, dates: Optional[str]) -> List[int]:
    if dates:
        start, end = _parse_date_range(dates)
        return [i for i, d in enumerate(dataset.dates) if start <= d <= end]
    splits = split_by_year(dataset, config.data.train_years, config.data.val_years, config.data.test_years)
    return getattr(splits, split)


def cmd_predict(args: Namespace) -> int:
    """评估模式前向，写出预测密度与原始 logit/magnitude 通道"""
    config = _config(args)
    out = Path(args.out)
    _guard_file(out, args.force)
    ckpt = load_checkpoint(_require(args.checkpoint or config.paths.checkpoint, "检查点"))
    dataset = load_dataset(_require(args.dataset or config.paths.dataset, "数据集"), config.data.grid)
    stats = NormStats.load(_require(args.stats or config.paths.stats, "统计量"))
    mode = args.mode or config.evaluation.prediction_mode
    threshold = config.evaluation.threshold if args.threshold is None else args.threshold

    indices = _select_indices(dataset, config, args.split, args.dates)
    if not indices:
        raise ConfigurationError("没有选中任何日期")
    dtype = ckpt.params.cls_weight.dtype
    loader = BatchLoader(
        dataset, batch_indices(indices, config.evaluation.batch_size), stats, dtype, config.data.prefetch,
    )
    target_unit = dataset.header["target"]["unit"]
    with MgridWriter(out, dataset.grid, PREDICTION_CHANNELS, [dataset.dates[i] for i in indices],
                     target=("flash_density", target_unit)) as writer, no_grad():
        for batch in loader:
            logits, magnitudes = forward(ckpt.params, batch.x, training=False, eps=ckpt.config.norm_eps)
            density = predict_density(logits, magnitudes, mode, threshold)
            for row in range(batch.size):
                writer.write_day(
                    np.stack([logits.values[row, 0], magnitudes.values[row, 0]]),
                    density.values[row, 0],
                    batch.mask[row, 0],
                )
    log_artifact("predictions", str(out), days=len(indices), mode=mode, threshold=threshold)
    return 0


# ======================
# evaluate
# ======================

def _read_targets(dataset, indices: Sequence[int]):
    H, W = dataset.grid.dims
    fields = np.empty((len(indices), H, W))
    masks = np.empty((len(indices), H, W))
    for row, i in enumerate(indices):
        sample = dataset[i]
        fields[row] = sample.target
        masks[row] = sample.mask
    return fields, masks


def cmd_evaluate(args: Namespace) -> int:
    """对齐预测与观测日期，计算全部诊断并写出 CSV/JSON"""
    config = _config(args)
    out = Path(args.out)
    _guard_dir(out, ("summary.json",), args.force)
    predictions = load_dataset(args.predictions, config.data.grid)
    observations = load_dataset(args.observations, config.data.grid)
    try:
        obs_indices = [observations.index_of(d) for d in predictions.dates]
    except DataError as e:
        raise AlignmentError(f"预测日期在观测中不存在: {e.details.get('date')}") from e

    pred_fields, pred_masks = _read_targets(predictions, range(len(predictions)))
    obs_fields, obs_masks = _read_targets(observations, obs_indices)
    masks = (obs_masks > 0) & (pred_masks > 0)
    report = evaluate(
        pred_fields,
        obs_fields,
        masks,
        predictions.dates,
        config.data.grid,
        regions=config.evaluation.regions,
        schemes=config.evaluation.schemes,
        weighting=config.evaluation.weighting,
    )
    report.write(out)
    write_resolved_config(config, out)
    log_artifact("evaluation", str(out), r_log1p=report.summary["global"]["r_log1p"])
    _emit(report.summary["global"])
    return 0


# ======================
# report
# ======================

def cmd_report(args: Namespace) -> int:
    """从评估目录渲染 SVG 图"""
    out = Path(args.out)
    src = Path(args.evaluation)
    if not (src / "summary.json").exists():
        raise FileNotFoundError(f"评估目录不完整: {src}")
    _guard_dir(out, ("annual_mean.svg",), args.force)
    for path in render_report(src, out):
        log_artifact("plot", str(path))
    return 0
