"""
Mjöllnir 主干网络

stem → 四个阶段（过渡层 + 残差块）→ 分类/回归双输出头。
默认全部卷积步长为 1，输出与输入网格同分辨率。
"""

from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.stats import truncnorm

from mjollnir.core.exceptions import ConfigurationError, DimensionError
from mjollnir.core.nn.layers import (
    BlockParams,
    InceptionDWParams,
    ParamGroup,
    SEParams,
    SeparableParams,
    depthwise_separable,
    inception_split,
    mjolnir_block,
    se_reduced_channels,
)
from mjollnir.core.tensor import Tensor4, ops


class ModelConfig(BaseModel):
    """网络结构超参数"""

    model_config = ConfigDict(extra="forbid")

    in_channels: int = Field(default=9, ge=1, description="输入预报因子通道数")
    stage_widths: Tuple[int, int, int, int] = Field(default=(48, 96, 192, 288), description="各阶段通道数")
    stage_depths: Tuple[int, int, int, int] = Field(default=(3, 3, 27, 3), description="各阶段残差块数")
    se_enabled: bool = Field(default=False, description="是否启用 SE 模块")
    se_reduction: int = Field(default=16, ge=1, description="SE 压缩比")
    layer_scale_init: Optional[float] = Field(default=1e-6, description="γ 初值，None 表示不使用层缩放")
    drop_path_rate: float = Field(default=0.0, ge=0.0, lt=1.0, description="最深一块的随机深度概率")
    resolution_preserving: bool = Field(default=True, description="全部步长为 1；否则阶段 2-4 下采样后双线性上采样")
    band_kernel_size: int = Field(default=11, ge=1, description="带状卷积核长度")
    pointwise_groups: int = Field(default=1, ge=1, description="逐点卷积分组数")
    block_norm_placement: Literal["pre", "post_dwconv"] = Field(default="pre", description="块内层归一化位置")
    norm_eps: float = Field(default=1e-6, gt=0.0, description="层归一化 eps")

    @field_validator("stage_widths", "stage_depths", mode="before")
    @classmethod
    def _four_stages(cls, value):
        if len(value) != 4:
            raise ValueError(f"需要恰好 4 个阶段，实际 {len(value)}")
        return tuple(value)

    @field_validator("stage_widths")
    @classmethod
    def _positive_widths(cls, value):
        if any(w < 1 for w in value):
            raise ValueError("阶段通道数必须 >= 1")
        return value

    @field_validator("stage_depths")
    @classmethod
    def _non_negative_depths(cls, value):
        if any(d < 0 for d in value):
            raise ValueError("阶段深度必须 >= 0")
        return value

    @field_validator("band_kernel_size")
    @classmethod
    def _odd_kernel(cls, value):
        if value % 2 == 0:
            raise ValueError("带状卷积核长度必须为奇数")
        return value

    @model_validator(mode="after")
    def _groups_divide_widths(self):
        for w in self.stage_widths:
            if w % self.pointwise_groups != 0:
                raise ValueError(f"pointwise_groups={self.pointwise_groups} 不能整除通道数 {w}")
        return self


@dataclass
class StageParams(ParamGroup):
    """一个阶段：可选过渡层 + 残差块列表（第一阶段由 stem 承担过渡）"""

    transition: Optional[SeparableParams]
    blocks: List[BlockParams] = field(default_factory=list)


@dataclass
class ModelParams(ParamGroup):
    """全部可学习参数"""

    stem: SeparableParams
    stages: List[StageParams]
    cls_weight: Tensor4
    cls_bias: Tensor4
    reg_weight: Tensor4
    reg_bias: Tensor4

    def as_dict(self) -> Dict[str, Tensor4]:
        return dict(self.named_tensors())

    def num_parameters(self) -> int:
        return sum(t.size for _, t in self.named_tensors())

    def set_requires_grad(self, flag: bool = True) -> None:
        for _, t in self.named_tensors():
            t.requires_grad = flag

    def zero_grad(self) -> None:
        for _, t in self.named_tensors():
            t.zero_grad()


# ======================
# 初始化
# ======================

class _Initializer:
    """按调用顺序从同一随机流抽取权重"""

    def __init__(self, seed: int, dtype):
        self.rng = np.random.default_rng(seed)
        self.dtype = dtype

    def conv(self, cout: int, cin_per_group: int, kh: int, kw: int) -> Tensor4:
        fan_in = cin_per_group * kh * kw
        std = np.sqrt(2.0 / fan_in)
        values = truncnorm.rvs(-2.0, 2.0, size=(cout, cin_per_group, kh, kw), random_state=self.rng) * std
        return Tensor4(values.astype(self.dtype))

    def const(self, channels: int, value: float) -> Tensor4:
        return Tensor4(np.full((1, channels, 1, 1), value, dtype=self.dtype))


def _separable(init: _Initializer, cin: int, cout: int, stride: int) -> SeparableParams:
    return SeparableParams(
        dw_weight=init.conv(cin, 1, 3, 3),
        dw_bias=init.const(cin, 0.0),
        pw_weight=init.conv(cout, cin, 1, 1),
        pw_bias=init.const(cout, 0.0),
        norm_scale=init.const(cout, 1.0),
        norm_shift=init.const(cout, 0.0),
        stride=stride,
    )


def _mixer(init: _Initializer, channels: int, k: int) -> InceptionDWParams:
    c_h, c_v, c_sq, c_id = inception_split(channels)

    def branch(c: int, kh: int, kw: int):
        if c == 0:
            return None, None
        return init.conv(c, 1, kh, kw), init.const(c, 0.0)

    h_w, h_b = branch(c_h, 1, k)
    v_w, v_b = branch(c_v, k, 1)
    s_w, s_b = branch(c_sq, 3, 3)
    return InceptionDWParams(h_w, h_b, v_w, v_b, s_w, s_b, identity_channels=c_id)


def _block(init: _Initializer, config: ModelConfig, channels: int, drop_prob: float) -> BlockParams:
    g = config.pointwise_groups
    hidden = 4 * channels
    se = None
    if config.se_enabled:
        cr = se_reduced_channels(channels, config.se_reduction)
        se = SEParams(w1=init.conv(cr, channels, 1, 1), w2=init.conv(channels, cr, 1, 1))
    gamma = None
    if config.layer_scale_init is not None:
        gamma = init.const(channels, config.layer_scale_init)
    return BlockParams(
        norm_scale=init.const(channels, 1.0),
        norm_shift=init.const(channels, 0.0),
        mixer=_mixer(init, channels, config.band_kernel_size),
        expand_weight=init.conv(hidden, channels // g, 1, 1),
        expand_bias=init.const(hidden, 0.0),
        reduce_weight=init.conv(channels, hidden // g, 1, 1),
        reduce_bias=init.const(channels, 0.0),
        se=se,
        gamma=gamma,
        drop_prob=drop_prob,
        groups=g,
        norm_placement=config.block_norm_placement,
        norm_eps=config.norm_eps,
    )


def drop_path_schedule(config: ModelConfig) -> List[float]:
    """随机深度概率随块深度从 0 线性增加到 drop_path_rate"""
    total = sum(config.stage_depths)
    if total == 0:
        return []
    return [float(p) for p in np.linspace(0.0, config.drop_path_rate, total)]


def init_params(config: ModelConfig, seed: int = 0, dtype=np.float32) -> ModelParams:
    """
    按配置构造并初始化参数。

    卷积核取 ±2σ 截断正态，σ = sqrt(2 / fan_in)；归一化缩放 1、平移 0；
    γ = layer_scale_init；所有偏置为 0。同一 seed 结果逐位相同。
    """
    init = _Initializer(seed, dtype)
    widths, depths = config.stage_widths, config.stage_depths
    probs = iter(drop_path_schedule(config))
    stem = _separable(init, config.in_channels, widths[0], stride=1)
    stages: List[StageParams] = []
    prev = widths[0]
    for i, (width, depth) in enumerate(zip(widths, depths)):
        transition = None
        if i > 0:
            stride = 1 if config.resolution_preserving else 2
            transition = _separable(init, prev, width, stride=stride)
        blocks = [_block(init, config, width, next(probs)) for _ in range(depth)]
        stages.append(StageParams(transition=transition, blocks=blocks))
        prev = width
    return ModelParams(
        stem=stem,
        stages=stages,
        cls_weight=init.conv(1, prev, 1, 1),
        cls_bias=init.const(1, 0.0),
        reg_weight=init.conv(1, prev, 1, 1),
        reg_bias=init.const(1, 0.0),
    )


def count_params(config: ModelConfig) -> int:
    """由层清单闭式计算参数总数"""

    def separable(cin: int, cout: int) -> int:
        return cin * 9 + cin + cout * cin + cout + 2 * cout

    def block(c: int) -> int:
        c_h, c_v, c_sq, _ = inception_split(c)
        k = config.band_kernel_size
        g = config.pointwise_groups
        n = 2 * c
        n += c_h * (k + 1) + c_v * (k + 1) + c_sq * (9 + 1)
        n += 4 * c * (c // g) + 4 * c
        n += c * (4 * c // g) + c
        if config.se_enabled:
            n += 2 * se_reduced_channels(c, config.se_reduction) * c
        if config.layer_scale_init is not None:
            n += c
        return n

    widths, depths = config.stage_widths, config.stage_depths
    total = separable(config.in_channels, widths[0])
    prev = widths[0]
    for i, (w, d) in enumerate(zip(widths, depths)):
        if i > 0:
            total += separable(prev, w)
        total += d * block(w)
        prev = w
    total += 2 * (prev + 1)
    return total


def no_decay_names(params: ModelParams) -> List[str]:
    """不参与权重衰减的参数：归一化缩放/平移与 γ"""
    excluded = ("norm_scale", "norm_shift", "gamma")
    return [name for name, _ in params.named_tensors() if name.rsplit(".", 1)[-1] in excluded]


# ======================
# 前向
# ======================

def forward(
    params: ModelParams,
    x: Tensor4,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
    eps: float = 1e-6,
) -> Tuple[Tensor4, Tensor4]:
    """
    返回 (logits, magnitudes)，形状均为 (B, 1, H, W)。
    magnitudes 经过 softplus，严格为正。
    """
    expected = params.stem.dw_weight.dims[0]
    if x.dims[1] != expected:
        raise DimensionError(
            f"输入通道数应为 in_channels={expected}，实际 {x.dims[1]}",
            axis="channels", expected=expected, actual=x.dims[1],
        )
    H, W = x.dims[2], x.dims[3]
    h = depthwise_separable(x, params.stem, eps)
    for stage in params.stages:
        if stage.transition is not None:
            h = depthwise_separable(h, stage.transition, eps)
        for block in stage.blocks:
            h = mjolnir_block(h, block, training, rng)
    if h.dims[2:] != (H, W):
        h = ops.upsample_bilinear(h, (H, W))
    logits = ops.conv2d(h, params.cls_weight, params.cls_bias)
    magnitudes = ops.softplus(ops.conv2d(h, params.reg_weight, params.reg_bias))
    return logits, magnitudes


PredictMode = Literal["gated", "expected"]


def predict_density(
    logits: Tensor4,
    magnitudes: Tensor4,
    mode: str = "gated",
    threshold: float = 0.5,
) -> Tensor4:
    """
    合并双头输出为闪电密度。

    gated: sigmoid(logit) > τ 处取 magnitude，否则 0
    expected: sigmoid(logit)·magnitude
    """
    if not 0.0 < threshold < 1.0:
        raise ConfigurationError(f"阈值 τ 必须位于 (0, 1)，实际 {threshold}", threshold=threshold)
    if logits.dims != magnitudes.dims:
        raise DimensionError("logits 与 magnitudes 形状不一致", axis="shape", expected=logits.dims, actual=magnitudes.dims)
    prob = ops.sigmoid(logits.detach()).values
    mag = magnitudes.values
    if mode == "gated":
        density = np.where(prob > threshold, mag, 0.0)
    elif mode == "expected":
        density = prob * mag
    else:
        raise ConfigurationError(f"未知的预测模式: {mode}", mode=mode)
    return Tensor4(np.maximum(density, 0.0).astype(magnitudes.dtype))
