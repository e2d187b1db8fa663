"""
多任务损失

ℒ = λ_cls·ℒ_cls + λ_reg·ℒ_reg
  ℒ_cls: 掩码内带正类权重的二元交叉熵均值
  ℒ_reg: 掩码内带异常权重的对数均方误差，分母为 Σm（权重只放大不重新归一化）
"""

from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import expit

from mjollnir.core.exceptions import DataError, DimensionError, EmptyMaskError
from mjollnir.core.tensor import Tensor4, make_result, ops

ArrayLike = Union[np.ndarray, Tensor4]


class LossConfig(BaseModel):
    """损失超参数"""

    model_config = ConfigDict(extra="forbid")

    lambda_cls: float = Field(default=1.0, ge=0.0, description="分类损失权重")
    lambda_reg: float = Field(default=1.0, ge=0.0, description="回归损失权重")
    pos_weight: float = Field(default=5.0, gt=0.0, description="正类重加权系数")
    quantile: float = Field(default=0.99, gt=0.0, lt=1.0, description="异常阈值分位数 q")
    w_anom: float = Field(default=5.0, ge=1.0, description="异常像素权重")
    eps: float = Field(default=1e-3, gt=0.0, description="对数平滑常数 ε")
    anomaly_threshold: Optional[float] = Field(default=None, description="预先计算的异常阈值；None 表示无异常像素")
    threshold_positive_only: bool = Field(default=False, description="分位数仅在有闪电的像素上计算")


@dataclass
class LossBreakdown:
    """损失分解"""

    total: Tensor4
    cls: float
    reg: float
    valid_count: int
    positive_count: int
    anomaly_count: int

    @property
    def total_value(self) -> float:
        return self.total.item()

    def as_dict(self) -> dict:
        return {
            "total": self.total_value,
            "cls": self.cls,
            "reg": self.reg,
            "valid": self.valid_count,
            "positive": self.positive_count,
            "anomaly": self.anomaly_count,
        }


def _array(value: ArrayLike) -> np.ndarray:
    return value.values if isinstance(value, Tensor4) else np.asarray(value)


def _valid(mask: ArrayLike, shape) -> np.ndarray:
    m = _array(mask)
    if m.shape != tuple(shape):
        raise DimensionError("掩码形状与预测不一致", axis="mask", expected=tuple(shape), actual=m.shape)
    valid = m > 0
    if not valid.any():
        raise EmptyMaskError("掩码全为 0，Σm == 0")
    return valid


def occurrence_target(y: ArrayLike, mask: Optional[ArrayLike] = None) -> np.ndarray:
    """o = 1 当 y > 0，否则 0；有效像素上的负值视为数据错误"""
    yv = _array(y)
    valid = np.ones(yv.shape, dtype=bool) if mask is None else _array(mask) > 0
    bad = valid & ~(yv >= 0)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise DataError(f"有效像素上的闪电密度为负或非有限: 位置 {list(idx)}", index=list(idx))
    return np.where(valid & (yv > 0), 1.0, 0.0)


def anomaly_threshold(
    values: Iterable[np.ndarray],
    q: float = 0.99,
    positive_only: bool = False,
) -> float:
    """
    训练集有效像素目标值的 q 分位数（顺序统计量之间线性插值）。

    Args:
        values: 各天有效像素目标值的一维数组流
        q: 分位数
        positive_only: 仅使用 y > 0 的像素
    """
    chunks = []
    for chunk in values:
        arr = np.asarray(chunk, dtype=np.float64).ravel()
        if positive_only:
            arr = arr[arr > 0]
        chunks.append(arr)
    pooled = np.concatenate(chunks) if chunks else np.empty(0)
    if pooled.size == 0:
        raise DataError("异常阈值计算时没有有效像素")
    return float(np.quantile(pooled, q, method="linear"))


def masked_bce(
    logits: Tensor4,
    targets: ArrayLike,
    mask: ArrayLike,
    pos_weight: float = 5.0,
) -> Tensor4:
    """
    ℒ_cls = (1/Σm) Σ m·BCE(ô, o; pos_weight)

    BCE = pos_weight·o·softplus(−ô) + (1−o)·softplus(ô)，logaddexp 形式避免溢出。
    """
    valid = _valid(mask, logits.dims)
    x = logits.values.astype(np.float64)
    o = np.where(valid, _array(targets), 0.0).astype(np.float64)
    x_safe = np.where(valid, x, 0.0)
    count = float(np.count_nonzero(valid))
    per_pixel = pos_weight * o * np.logaddexp(0.0, -x_safe) + (1.0 - o) * np.logaddexp(0.0, x_safe)
    value = np.sum(np.where(valid, per_pixel, 0.0), dtype=np.float64) / count

    def backward(g):
        s = expit(x_safe)
        dx = pos_weight * o * (s - 1.0) + (1.0 - o) * s
        return (np.where(valid, dx, 0.0) * (float(g.reshape(-1)[0]) / count),)

    return make_result(np.full((1, 1, 1, 1), value), "masked_bce", (logits,), backward)


def masked_log_mse(
    pred: Tensor4,
    target: ArrayLike,
    mask: ArrayLike,
    config: LossConfig,
) -> Tensor4:
    """
    ℒ_reg = (1/Σm) Σ m·w·(log(ŷ + ε) − log(y + ε))²

    w = w_anom 当 y > anomaly_threshold，否则 1。
    """
    valid = _valid(mask, pred.dims)
    eps = config.eps
    yhat = np.where(valid, pred.values.astype(np.float64), 1.0)
    y = np.where(valid, _array(target), 0.0).astype(np.float64)
    arg_pred = yhat + eps
    arg_true = y + eps
    bad = valid & ~((arg_pred > 0) & np.isfinite(arg_pred) & (arg_true > 0) & np.isfinite(arg_true))
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise DataError(f"对数参数非正或非有限: 位置 {list(idx)}", index=list(idx))

    weight = _anomaly_weight(y, valid, config)
    diff = np.where(valid, np.log(np.where(valid, arg_pred, 1.0)) - np.log(np.where(valid, arg_true, 1.0)), 0.0)
    count = float(np.count_nonzero(valid))
    value = np.sum(weight * diff * diff, dtype=np.float64) / count

    def backward(g):
        grad = np.where(valid, 2.0 * weight * diff / arg_pred, 0.0)
        return (grad * (float(g.reshape(-1)[0]) / count),)

    return make_result(np.full((1, 1, 1, 1), value), "masked_log_mse", (pred,), backward)


def _anomaly_weight(y: np.ndarray, valid: np.ndarray, config: LossConfig) -> np.ndarray:
    if config.anomaly_threshold is None:
        return np.where(valid, 1.0, 0.0)
    return np.where(valid, np.where(y > config.anomaly_threshold, config.w_anom, 1.0), 0.0)


def total_loss(
    logits: Tensor4,
    magnitudes: Tensor4,
    y: ArrayLike,
    mask: ArrayLike,
    config: LossConfig,
) -> LossBreakdown:
    """按 ℒ = λ_cls·ℒ_cls + λ_reg·ℒ_reg 组合，并返回完整分解"""
    if logits.dims != magnitudes.dims:
        raise DimensionError("logits 与 magnitudes 形状不一致", axis="shape", expected=logits.dims, actual=magnitudes.dims)
    valid = _valid(mask, logits.dims)
    yv = _array(y)
    o = occurrence_target(yv, valid)
    l_cls = masked_bce(logits, o, valid, config.pos_weight)
    l_reg = masked_log_mse(magnitudes, yv, valid, config)
    total = ops.add(ops.scale(l_cls, config.lambda_cls), ops.scale(l_reg, config.lambda_reg))

    y_valid = np.where(valid, yv, 0.0)
    anomalies = 0
    if config.anomaly_threshold is not None:
        anomalies = int(np.count_nonzero(valid & (y_valid > config.anomaly_threshold)))
    return LossBreakdown(
        total=total,
        cls=l_cls.item(),
        reg=l_reg.item(),
        valid_count=int(np.count_nonzero(valid)),
        positive_count=int(np.count_nonzero(o)),
        anomaly_count=anomalies,
    )
