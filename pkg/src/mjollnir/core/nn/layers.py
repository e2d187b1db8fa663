"""
复合层

Inception 式深度卷积、逐点分组卷积、SE 通道注意力、随机深度、
深度可分离卷积以及残差块。参数以 dataclass 分组存放，层本身是纯函数。
"""

from dataclasses import dataclass, fields
from typing import Iterator, List, Optional, Tuple

import numpy as np

from mjollnir.core.exceptions import ConfigurationError, DimensionError
from mjollnir.core.tensor import Tensor4, ops

NORM_PLACEMENTS = ("pre", "post_dwconv")


class ParamGroup:
    """参数分组基类：按字段声明顺序给出带点号名称的张量"""

    def named_tensors(self, prefix: str = "") -> Iterator[Tuple[str, Tensor4]]:
        for f in fields(self):  # type: ignore[arg-type]
            value = getattr(self, f.name)
            name = f"{prefix}{f.name}"
            if isinstance(value, Tensor4):
                yield name, value
            elif isinstance(value, ParamGroup):
                yield from value.named_tensors(f"{name}.")
            elif isinstance(value, list):
                for i, item in enumerate(value):
                    if isinstance(item, ParamGroup):
                        yield from item.named_tensors(f"{name}.{i}.")

    def tensors(self) -> List[Tensor4]:
        return [t for _, t in self.named_tensors()]


@dataclass
class InceptionDWParams(ParamGroup):
    """
    Inception 深度卷积参数。

    通道按 (水平带, 垂直带, 方形, 恒等) 顺序连续切分；
    通道数为 0 的分支不持有权重（字段为 None）。
    """

    band_h_weight: Optional[Tensor4]
    band_h_bias: Optional[Tensor4]
    band_v_weight: Optional[Tensor4]
    band_v_bias: Optional[Tensor4]
    square_weight: Optional[Tensor4]
    square_bias: Optional[Tensor4]
    identity_channels: int

    @staticmethod
    def _width(weight: Optional[Tensor4]) -> int:
        return 0 if weight is None else weight.dims[0]

    @property
    def split(self) -> Tuple[int, int, int, int]:
        return (
            self._width(self.band_h_weight),
            self._width(self.band_v_weight),
            self._width(self.square_weight),
            self.identity_channels,
        )

    @property
    def channels(self) -> int:
        return sum(self.split)


@dataclass
class SEParams(ParamGroup):
    """SE 模块：W1 (Cr, C, 1, 1)，W2 (C, Cr, 1, 1)，无偏置"""

    w1: Tensor4
    w2: Tensor4

    @property
    def reduced(self) -> int:
        return self.w1.dims[0]


@dataclass
class SeparableParams(ParamGroup):
    """深度可分离卷积 + 层归一化（stem 与阶段过渡）"""

    dw_weight: Tensor4
    dw_bias: Tensor4
    pw_weight: Tensor4
    pw_bias: Tensor4
    norm_scale: Tensor4
    norm_shift: Tensor4
    stride: int = 1


@dataclass
class BlockParams(ParamGroup):
    """残差块参数"""

    norm_scale: Tensor4
    norm_shift: Tensor4
    mixer: InceptionDWParams
    expand_weight: Tensor4
    expand_bias: Tensor4
    reduce_weight: Tensor4
    reduce_bias: Tensor4
    se: Optional[SEParams] = None
    gamma: Optional[Tensor4] = None
    drop_prob: float = 0.0
    groups: int = 1
    norm_placement: str = "pre"
    norm_eps: float = 1e-6

    @property
    def width(self) -> int:
        return self.norm_scale.dims[1]


def inception_split(channels: int) -> Tuple[int, int, int, int]:
    """默认切分：三个卷积分支各取 floor(C/8)，其余走恒等分支"""
    branch = channels // 8
    return branch, branch, branch, channels - 3 * branch


def se_reduced_channels(channels: int, reduction: int) -> int:
    return max(1, channels // reduction)


# ======================
# 层
# ======================

def inception_dwconv(x: Tensor4, params: InceptionDWParams) -> Tensor4:
    """四分支深度卷积，"same" 填充，空间尺寸不变"""
    C = x.dims[1]
    if C != params.channels:
        raise DimensionError(
            f"inception_dwconv: 输入通道 {C} 与分支通道之和 {params.channels} 不符",
            axis="channels", expected=params.channels, actual=C,
        )
    c_h, c_v, c_sq, c_id = params.split
    pieces = ops.split_channels(x, [c_h, c_v, c_sq, c_id])
    branches = (
        (params.band_h_weight, params.band_h_bias),
        (params.band_v_weight, params.band_v_bias),
        (params.square_weight, params.square_bias),
    )
    outputs = []
    for piece, (weight, bias) in zip(pieces[:3], branches):
        if weight is None:
            continue
        kh, kw = weight.dims[2], weight.dims[3]
        outputs.append(ops.conv2d(
            piece, weight, bias,
            padding=(kh // 2, kw // 2), groups=weight.dims[0],
        ))
    if c_id > 0:
        outputs.append(pieces[3])
    if len(outputs) == 1:
        return outputs[0]
    return ops.concat_channels(outputs)


def pointwise_group_conv(
    x: Tensor4,
    weight: Tensor4,
    bias: Optional[Tensor4] = None,
    groups: int = 1,
) -> Tensor4:
    """分组内的 1×1 卷积"""
    if weight.dims[2:] != (1, 1):
        raise DimensionError("pointwise_group_conv 需要 1×1 卷积核", axis="kernel", expected=(1, 1), actual=weight.dims[2:])
    return ops.conv2d(x, weight, bias, groups=groups)


def se_block(x: Tensor4, params: SEParams) -> Tensor4:
    """挤压（全局平均池化）→ 激励 σ(W2·relu(W1·s)) → 按通道缩放"""
    s = ops.global_avg_pool(x)
    e = ops.sigmoid(ops.conv2d(ops.relu(ops.conv2d(s, params.w1)), params.w2))
    return ops.channel_mul(x, e)


def drop_path(
    x: Tensor4,
    p: float,
    training: bool,
    rng: Optional[np.random.Generator] = None,
) -> Tensor4:
    """随机深度：训练时按样本以概率 p 丢弃残差分支，保留的样本放大 1/(1-p)"""
    if p < 0.0 or p >= 1.0:
        raise ConfigurationError(f"drop_path 概率必须满足 0 <= p < 1，实际 {p}", p=p)
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ConfigurationError("训练模式下 drop_path 需要随机数生成器")
    B = x.dims[0]
    keep = (rng.random(B) >= p).astype(x.dtype) / (1.0 - p)
    return ops.mul(x, Tensor4(keep.reshape(B, 1, 1, 1)))


def depthwise_separable(x: Tensor4, params: SeparableParams, eps: float = 1e-6) -> Tensor4:
    """3×3 深度卷积 → 1×1 逐点卷积 → 通道层归一化"""
    C = x.dims[1]
    h = ops.conv2d(x, params.dw_weight, params.dw_bias, stride=params.stride, padding=1, groups=C)
    h = ops.conv2d(h, params.pw_weight, params.pw_bias)
    return ops.layer_norm_cf(h, params.norm_scale, params.norm_shift, eps)


def mjolnir_block(
    x: Tensor4,
    params: BlockParams,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor4:
    """
    残差块：
    归一化 → Inception 深度卷积 → 扩张 4× → GELU → 收缩 → [SE] → [γ] → DropPath → 残差相加
    """
    if x.dims[1] != params.width:
        raise DimensionError(
            f"mjolnir_block: 输入通道 {x.dims[1]} 与块宽度 {params.width} 不符",
            axis="channels", expected=params.width, actual=x.dims[1],
        )
    if params.norm_placement not in NORM_PLACEMENTS:
        raise ConfigurationError(f"未知的归一化位置: {params.norm_placement}")

    h = x
    if params.norm_placement == "pre":
        h = ops.layer_norm_cf(h, params.norm_scale, params.norm_shift, params.norm_eps)
    h = inception_dwconv(h, params.mixer)
    if params.norm_placement == "post_dwconv":
        h = ops.layer_norm_cf(h, params.norm_scale, params.norm_shift, params.norm_eps)
    h = pointwise_group_conv(h, params.expand_weight, params.expand_bias, params.groups)
    h = ops.gelu(h)
    h = pointwise_group_conv(h, params.reduce_weight, params.reduce_bias, params.groups)
    if params.se is not None:
        h = se_block(h, params.se)
    if params.gamma is not None:
        h = ops.channel_mul(h, params.gamma)
    h = drop_path(h, params.drop_prob, training, rng)
    return ops.add(x, h)
