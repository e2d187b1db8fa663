"""
AdamW 优化器（解耦权重衰减）

    m ← β1·m + (1−β1)·g
    v ← β2·v + (1−β2)·g²
    p ← p − lr·(m̂ / (√v̂ + eps) + weight_decay·p)
"""

import math
from dataclasses import dataclass, field
from typing import Collection, Dict, Literal, Mapping, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from mjollnir.core.exceptions import DimensionError, TrainingError
from mjollnir.core.nn.checkpoint import OptimizerSnapshot
from mjollnir.core.tensor import Tensor4


class OptimConfig(BaseModel):
    """优化器与训练循环超参数"""

    model_config = ConfigDict(extra="forbid")

    lr: float = Field(default=1e-3, gt=0.0, description="学习率")
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0, description="一阶矩衰减")
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0, description="二阶矩衰减")
    eps: float = Field(default=1e-8, gt=0.0, description="数值稳定项")
    weight_decay: float = Field(default=0.01, ge=0.0, description="解耦权重衰减系数")
    epochs: int = Field(default=15, ge=1, description="训练轮数")
    batch_size: int = Field(default=8, ge=1, description="每批天数")
    seed: Optional[int] = Field(default=None, description="随机种子；None 时取运行配置的根种子")
    schedule: Literal["constant", "cosine"] = Field(default="constant", description="学习率调度")
    max_grad_norm: Optional[float] = Field(default=None, gt=0.0, description="全局梯度范数裁剪阈值")


@dataclass
class OptimState:
    """按参数名存放的一阶/二阶矩与步数"""

    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def zeros(cls, params: Mapping[str, Tensor4]) -> "OptimState":
        return cls(
            m={n: np.zeros_like(p.values) for n, p in params.items()},
            v={n: np.zeros_like(p.values) for n, p in params.items()},
        )

    def snapshot(self) -> OptimizerSnapshot:
        return OptimizerSnapshot(t=self.t, m=dict(self.m), v=dict(self.v))

    @classmethod
    def from_snapshot(cls, snapshot: OptimizerSnapshot) -> "OptimState":
        return cls(m=dict(snapshot.m), v=dict(snapshot.v), t=snapshot.t)


def adamw_step(
    params: Mapping[str, Tensor4],
    grads: Mapping[str, np.ndarray],
    state: OptimState,
    config: OptimConfig,
    lr: Optional[float] = None,
    decay_exclude: Collection[str] = (),
) -> OptimState:
    """
    原地执行一步 AdamW。

    Args:
        params: 参数名 → 张量（原地更新 values）
        grads: 参数名 → 梯度
        state: 优化器状态（原地更新）
        config: 超参数
        lr: 覆盖学习率（调度器给出）；None 时用 config.lr
        decay_exclude: 不做权重衰减的参数名

    Raises:
        TrainingError: 梯度非有限（此时不修改任何参数）
    """
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            raise TrainingError(f"参数 {name} 缺少梯度", parameter=name)
        if g.shape != p.dims:
            raise DimensionError(f"参数 {name} 的梯度形状不符", axis=name, expected=p.dims, actual=g.shape)
        if not np.isfinite(g).all():
            raise TrainingError(f"参数 {name} 的梯度非有限", parameter=name)

    lr = config.lr if lr is None else lr
    b1, b2 = config.beta1, config.beta2
    state.t += 1
    bias1 = 1.0 - b1 ** state.t
    bias2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name].astype(np.float64)
        m = b1 * state.m[name].astype(np.float64) + (1.0 - b1) * g
        v = b2 * state.v[name].astype(np.float64) + (1.0 - b2) * g * g
        m_hat = m / bias1
        v_hat = v / bias2
        pv = p.values.astype(np.float64)
        decay = 0.0 if name in decay_exclude else config.weight_decay
        update = m_hat / (np.sqrt(v_hat) + config.eps) + decay * pv
        p.values = (pv - lr * update).astype(p.dtype)
        state.m[name] = m.astype(p.dtype)
        state.v[name] = v.astype(p.dtype)
    return state


def lr_at(config: OptimConfig, step: int, total_steps: int) -> float:
    """第 step 步（从 0 计）的学习率"""
    if config.schedule == "constant" or total_steps <= 1:
        return config.lr
    progress = min(step, total_steps - 1) / (total_steps - 1)
    return 0.5 * config.lr * (1.0 + math.cos(math.pi * progress))


def clip_grad_norm(grads: Dict[str, np.ndarray], max_norm: float) -> float:
    """按全局 L2 范数原地裁剪，返回裁剪前的范数"""
    total = math.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values()))
    if total > max_norm and total > 0.0:
        factor = max_norm / total
        for name in grads:
            grads[name] = (grads[name] * factor).astype(grads[name].dtype)
    return total
