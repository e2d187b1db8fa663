"""
可微算子

逐元素、归约与卷积原语。卷积和归约在 float64 中累加，结果再转回输入精度；
归约顺序固定，不做并行重结合，保证同输入同输出。
"""

from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import erf, expit

from mjollnir.core.exceptions import DimensionError
from mjollnir.core.tensor.tensor import Tensor4, make_result

IntPair = Union[int, Tuple[int, int]]

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _pair(value: IntPair) -> Tuple[int, int]:
    if isinstance(value, (tuple, list)):
        return int(value[0]), int(value[1])
    return int(value), int(value)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """把广播后的梯度按原形状求和还原"""
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _check_broadcast(a: Tensor4, b: Tensor4, op: str) -> None:
    names = ("batch", "channels", "height", "width")
    for axis, (da, db) in enumerate(zip(a.dims, b.dims)):
        if da != db and da != 1 and db != 1:
            raise DimensionError(
                f"{op}: 第 {names[axis]} 轴无法广播",
                axis=names[axis], expected=da, actual=db,
            )


# ======================
# 逐元素算子
# ======================

def add(a: Tensor4, b: Tensor4) -> Tensor4:
    _check_broadcast(a, b, "add")

    def backward(g):
        return _unbroadcast(g, a.dims), _unbroadcast(g, b.dims)

    return make_result(a.values + b.values, "add", (a, b), backward)


def sub(a: Tensor4, b: Tensor4) -> Tensor4:
    _check_broadcast(a, b, "sub")

    def backward(g):
        return _unbroadcast(g, a.dims), _unbroadcast(-g, b.dims)

    return make_result(a.values - b.values, "sub", (a, b), backward)


def mul(a: Tensor4, b: Tensor4) -> Tensor4:
    _check_broadcast(a, b, "mul")
    av, bv = a.values, b.values

    def backward(g):
        return _unbroadcast(g * bv, a.dims), _unbroadcast(g * av, b.dims)

    return make_result(av * bv, "mul", (a, b), backward)


def scale(a: Tensor4, factor: float) -> Tensor4:
    factor = float(factor)

    def backward(g):
        return (g * factor,)

    return make_result(a.values * factor, "scale", (a,), backward)


def channel_mul(x: Tensor4, s: Tensor4) -> Tensor4:
    """按通道广播相乘，s 形状为 (B, C, 1, 1) 或 (1, C, 1, 1)"""
    B, C, _, _ = x.dims
    sb, sc, sh, sw = s.dims
    if sc != C:
        raise DimensionError("channel_mul: 通道数不一致", axis="channels", expected=C, actual=sc)
    if sb not in (1, B) or sh != 1 or sw != 1:
        raise DimensionError("channel_mul: 缩放张量必须为 (B|1, C, 1, 1)", axis="scale", expected=(B, C, 1, 1), actual=s.dims)
    return mul(x, s)


def sigmoid(x: Tensor4) -> Tensor4:
    s = expit(x.values)

    def backward(g):
        return (g * s * (1.0 - s),)

    return make_result(s, "sigmoid", (x,), backward)


def relu(x: Tensor4) -> Tensor4:
    positive = x.values > 0

    def backward(g):
        return (g * positive,)

    return make_result(np.where(positive, x.values, 0.0).astype(x.dtype), "relu", (x,), backward)


def gelu(x: Tensor4) -> Tensor4:
    """精确 erf 形式：x·Φ(x)"""
    xv = x.values.astype(np.float64)
    cdf = 0.5 * (1.0 + erf(xv / _SQRT2))

    def backward(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * xv * xv)
        return (g * (cdf + xv * pdf),)

    return make_result((xv * cdf).astype(x.dtype), "gelu", (x,), backward)


def softplus(x: Tensor4) -> Tensor4:
    xv = x.values

    def backward(g):
        return (g * expit(xv),)

    return make_result(np.logaddexp(0.0, xv), "softplus", (x,), backward)


def sum_all(x: Tensor4) -> Tensor4:
    """全部元素求和 -> (1, 1, 1, 1)"""
    total = np.sum(x.values, dtype=np.float64).reshape(1, 1, 1, 1)

    def backward(g):
        return (np.broadcast_to(g.reshape(1, 1, 1, 1), x.dims).copy(),)

    return make_result(total, "sum_all", (x,), backward)


# ======================
# 通道切分与拼接
# ======================

def split_channels(x: Tensor4, sizes: Sequence[int]) -> List[Tensor4]:
    """沿通道轴切成连续的若干组"""
    C = x.dims[1]
    if sum(sizes) != C or any(s < 0 for s in sizes):
        raise DimensionError("split_channels: 切分大小之和必须等于通道数", axis="channels", expected=C, actual=list(sizes))
    pieces: List[Tensor4] = []
    start = 0
    for size in sizes:
        lo, hi = start, start + size

        def backward(g, lo=lo, hi=hi):
            full = np.zeros(x.dims, dtype=g.dtype)
            full[:, lo:hi] = g
            return (full,)

        pieces.append(make_result(x.values[:, lo:hi].copy(), "split_channels", (x,), backward))
        start = hi
    return pieces


def concat_channels(parts: Sequence[Tensor4]) -> Tensor4:
    """沿通道轴拼接"""
    if not parts:
        raise DimensionError("concat_channels: 至少需要一个输入", axis="channels", expected=">=1", actual=0)
    B, _, H, W = parts[0].dims
    for p in parts[1:]:
        if (p.dims[0], p.dims[2], p.dims[3]) != (B, H, W):
            raise DimensionError("concat_channels: 非通道轴不一致", axis="spatial", expected=(B, H, W), actual=p.dims)
    bounds = np.cumsum([0] + [p.dims[1] for p in parts])

    def backward(g):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(parts)))

    return make_result(np.concatenate([p.values for p in parts], axis=1), "concat_channels", tuple(parts), backward)


# ======================
# 卷积
# ======================

def conv2d(
    x: Tensor4,
    weight: Tensor4,
    bias: Optional[Tensor4] = None,
    stride: IntPair = 1,
    padding: IntPair = 0,
    groups: int = 1,
) -> Tensor4:
    """
    二维互相关（零填充）。

    weight 形状 (Cout, Cin/groups, kh, kw)；bias 形状 (1, Cout, 1, 1)。
    深度卷积取 groups=C，逐点卷积取 kh=kw=1。
    """
    B, Cin, H, W = x.dims
    Cout, cin_g, kh, kw = weight.dims
    if groups < 1 or Cin % groups != 0:
        raise DimensionError(f"conv2d: 输入通道 {Cin} 不能被 groups={groups} 整除", axis="channels", expected=f"multiple of {groups}", actual=Cin)
    if cin_g * groups != Cin:
        raise DimensionError("conv2d: 卷积核输入通道与输入不符", axis="kernel_in_channels", expected=Cin // groups, actual=cin_g)
    if Cout % groups != 0:
        raise DimensionError("conv2d: 输出通道不能被 groups 整除", axis="kernel_out_channels", expected=f"multiple of {groups}", actual=Cout)
    if bias is not None and bias.dims != (1, Cout, 1, 1):
        raise DimensionError("conv2d: 偏置形状错误", axis="bias", expected=(1, Cout, 1, 1), actual=bias.dims)
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    if sh < 1 or sw < 1 or ph < 0 or pw < 0:
        raise DimensionError("conv2d: stride 必须为正且 padding 非负", axis="stride", expected=">=1", actual=(sh, sw))
    Hp, Wp = H + 2 * ph, W + 2 * pw
    if Hp < kh:
        raise DimensionError("conv2d: 填充后高度小于卷积核", axis="height", expected=f">={kh}", actual=Hp)
    if Wp < kw:
        raise DimensionError("conv2d: 填充后宽度小于卷积核", axis="width", expected=f">={kw}", actual=Wp)
    Ho = (Hp - kh) // sh + 1
    Wo = (Wp - kw) // sw + 1
    G = groups
    cout_g = Cout // G
    depthwise = cin_g == 1 and cout_g == 1

    xp = np.pad(x.values.astype(np.float64), ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    xg = xp.reshape(B, G, cin_g, Hp, Wp)
    wd = weight.values.astype(np.float64).reshape(G, cout_g, cin_g, kh, kw)

    def tap(arr: np.ndarray, i: int, j: int) -> np.ndarray:
        return arr[..., i:i + sh * (Ho - 1) + 1:sh, j:j + sw * (Wo - 1) + 1:sw]

    out = np.zeros((B, G, cout_g, Ho, Wo), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            xt = tap(xg, i, j)
            if depthwise:
                out += xt * wd[:, :, :, i, j].reshape(1, G, 1, 1, 1)
            else:
                flat = xt.reshape(B, G, cin_g, Ho * Wo)
                out += np.matmul(wd[:, :, :, i, j], flat).reshape(B, G, cout_g, Ho, Wo)
    out = out.reshape(B, Cout, Ho, Wo)
    if bias is not None:
        out += bias.values.astype(np.float64)

    def backward(g):
        gout = g.astype(np.float64).reshape(B, G, cout_g, Ho, Wo)
        gxp = np.zeros_like(xg)
        gw = np.zeros_like(wd)
        gflat = gout.reshape(B, G, cout_g, Ho * Wo)
        for i in range(kh):
            for j in range(kw):
                xt = tap(xg, i, j)
                if depthwise:
                    gw[:, 0, 0, i, j] = np.einsum("bghw,bghw->g", gout[:, :, 0], xt[:, :, 0])
                    tap(gxp, i, j)[...] += gout * wd[:, :, :, i, j].reshape(1, G, 1, 1, 1)
                else:
                    flat = xt.reshape(B, G, cin_g, Ho * Wo)
                    gw[:, :, :, i, j] = np.matmul(gflat, flat.transpose(0, 1, 3, 2)).sum(axis=0)
                    contrib = np.matmul(wd[:, :, :, i, j].transpose(0, 2, 1), gflat)
                    tap(gxp, i, j)[...] += contrib.reshape(B, G, cin_g, Ho, Wo)
        gx = gxp.reshape(B, Cin, Hp, Wp)[:, :, ph:ph + H, pw:pw + W]
        gb = None if bias is None else g.astype(np.float64).sum(axis=(0, 2, 3)).reshape(1, Cout, 1, 1)
        return gx, gw.reshape(weight.dims), gb

    inputs: Tuple[Tensor4, ...] = (x, weight) if bias is None else (x, weight, bias)

    def backward_dispatch(g):
        gx, gw, gb = backward(g)
        return (gx, gw) if bias is None else (gx, gw, gb)

    return make_result(out.astype(x.dtype), "conv2d", inputs, backward_dispatch)


# ======================
# 归一化与池化
# ======================

def layer_norm_cf(x: Tensor4, scale: Tensor4, shift: Tensor4, eps: float = 1e-6) -> Tensor4:
    """channels-first 层归一化：在每个 (b, h, w) 位置沿通道轴标准化"""
    B, C, H, W = x.dims
    if C == 0:
        raise DimensionError("layer_norm_cf: 通道数为零", axis="channels", expected=">=1", actual=0)
    for label, t in (("scale", scale), ("shift", shift)):
        if t.dims != (1, C, 1, 1):
            raise DimensionError(f"layer_norm_cf: {label} 形状错误", axis=label, expected=(1, C, 1, 1), actual=t.dims)
    xv = x.values.astype(np.float64)
    mu = xv.mean(axis=1, keepdims=True)
    centered = xv - mu
    var = (centered * centered).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    sv = scale.values.astype(np.float64)
    out = xhat * sv + shift.values.astype(np.float64)

    def backward(g):
        g64 = g.astype(np.float64)
        dxhat = g64 * sv
        dx = inv_std * (
            dxhat
            - dxhat.mean(axis=1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)
        )
        dscale = (g64 * xhat).sum(axis=(0, 2, 3)).reshape(1, C, 1, 1)
        dshift = g64.sum(axis=(0, 2, 3)).reshape(1, C, 1, 1)
        return dx, dscale, dshift

    return make_result(out.astype(x.dtype), "layer_norm_cf", (x, scale, shift), backward)


def global_avg_pool(x: Tensor4) -> Tensor4:
    """每个 (batch, channel) 的空间均值 -> (B, C, 1, 1)"""
    B, C, H, W = x.dims
    if H * W < 1:
        raise DimensionError("global_avg_pool: 空间范围为空", axis="spatial", expected=">=1", actual=H * W)
    pooled = x.values.astype(np.float64).mean(axis=(2, 3), keepdims=True)
    inv = 1.0 / (H * W)

    def backward(g):
        return (np.broadcast_to(g.astype(np.float64) * inv, (B, C, H, W)).copy(),)

    return make_result(pooled.astype(x.dtype), "global_avg_pool", (x,), backward)


def _interp_matrix(out_size: int, in_size: int) -> np.ndarray:
    """双线性插值矩阵（半像素对齐，边界夹紧）"""
    A = np.zeros((out_size, in_size), dtype=np.float64)
    ratio = in_size / out_size
    for o in range(out_size):
        src = max((o + 0.5) * ratio - 0.5, 0.0)
        i0 = min(int(np.floor(src)), in_size - 1)
        i1 = min(i0 + 1, in_size - 1)
        frac = src - i0
        A[o, i0] += 1.0 - frac
        A[o, i1] += frac
    return A


def upsample_bilinear(x: Tensor4, size: Tuple[int, int]) -> Tensor4:
    """双线性上采样到给定 (H, W)"""
    B, C, H, W = x.dims
    Ho, Wo = int(size[0]), int(size[1])
    if Ho < 1 or Wo < 1:
        raise DimensionError("upsample_bilinear: 目标尺寸非法", axis="spatial", expected=">=1", actual=(Ho, Wo))
    Ah = _interp_matrix(Ho, H)
    Aw = _interp_matrix(Wo, W)
    out = np.matmul(np.matmul(Ah, x.values.astype(np.float64)), Aw.T)

    def backward(g):
        return (np.matmul(np.matmul(Ah.T, g.astype(np.float64)), Aw),)

    return make_result(out.astype(x.dtype), "upsample_bilinear", (x,), backward)


def mean_all(x: Tensor4) -> Tensor4:
    """全部元素均值 -> (1, 1, 1, 1)"""
    if x.size == 0:
        raise DimensionError("mean_all: 张量为空", axis="size", expected=">=1", actual=0)
    return scale(sum_all(x), 1.0 / x.size)
