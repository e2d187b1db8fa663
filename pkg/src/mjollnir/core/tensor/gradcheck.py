"""
有限差分梯度检查

对每个坐标用中心差分估计梯度，并与反向模式梯度比较。
只在 float64 下使用。
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from mjollnir.core.exceptions import ConfigurationError, GradientCheckError
from mjollnir.core.tensor.tensor import Tensor4

ParamSpec = Union[Sequence[Tensor4], Mapping[str, Tensor4]]


@dataclass
class GradCheckReport:
    """梯度检查报告"""

    max_rel_error: float
    worst_parameter: Optional[str]
    worst_index: Optional[Tuple[int, ...]]
    checked_coords: int
    tolerance: float
    per_parameter: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"[{status}] max_rel_error={self.max_rel_error:.3e} "
            f"at {self.worst_parameter}{list(self.worst_index or ())} "
            f"over {self.checked_coords} coords (tol={self.tolerance:g})"
        )


def _named(params: ParamSpec) -> List[Tuple[str, Tensor4]]:
    if isinstance(params, Mapping):
        return list(params.items())
    return [(t.name or f"param_{i}", t) for i, t in enumerate(params)]


def _evaluate(f: Callable[[], Tensor4], name: str, index: Tuple[int, ...]) -> float:
    value = f().item()
    if not np.isfinite(value):
        raise GradientCheckError(
            f"目标函数在 {name}{list(index)} 处非有限: {value}",
            parameter=name, index=index,
        )
    return value


def finite_diff_check(
    f: Callable[[], Tensor4],
    params: ParamSpec,
    step: float = 1e-5,
    tolerance: float = 1e-4,
    abs_floor: float = 1e-6,
    max_coords: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> GradCheckReport:
    """
    比较中心差分梯度与反向模式梯度。

    Args:
        f: 无参闭包，返回标量 Tensor4（读取 params 的当前值）
        params: 需要检查的叶子张量（列表或名称映射）
        step: 差分步长
        tolerance: 最大相对误差阈值
        abs_floor: 相对误差分母下限，避免两者都接近 0 时放大噪声
        max_coords: 每个参数最多抽查的坐标数（None 表示全部）
        rng: 抽查坐标用的随机源

    Returns:
        GradCheckReport
    """
    named = _named(params)
    for name, tensor in named:
        if tensor.dtype != np.float64:
            raise ConfigurationError(f"梯度检查需要 float64 参数: {name} 为 {tensor.dtype}", parameter=name)
        tensor.requires_grad = True
        tensor.zero_grad()

    base = f()
    base_value = base.item()
    if not np.isfinite(base_value):
        raise GradientCheckError(f"目标函数在初始点非有限: {base_value}")
    base.backward()

    rng = rng or np.random.default_rng(0)
    worst = 0.0
    worst_name: Optional[str] = None
    worst_index: Optional[Tuple[int, ...]] = None
    checked = 0
    per_param: Dict[str, float] = {}

    for name, tensor in named:
        analytic = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.values)
        flat_indices = np.arange(tensor.size)
        if max_coords is not None and tensor.size > max_coords:
            flat_indices = np.sort(rng.choice(tensor.size, size=max_coords, replace=False))
        param_worst = 0.0
        for flat in flat_indices:
            index = tuple(int(i) for i in np.unravel_index(flat, tensor.dims))
            original = tensor.values[index]
            tensor.values[index] = original + step
            plus = _evaluate(f, name, index)
            tensor.values[index] = original - step
            minus = _evaluate(f, name, index)
            tensor.values[index] = original
            numeric = (plus - minus) / (2.0 * step)
            a = float(analytic[index])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), abs_floor)
            checked += 1
            param_worst = max(param_worst, rel)
            if rel > worst:
                worst, worst_name, worst_index = rel, name, index
        per_param[name] = param_worst

    return GradCheckReport(
        max_rel_error=worst,
        worst_parameter=worst_name,
        worst_index=worst_index,
        checked_coords=checked,
        tolerance=tolerance,
        per_parameter=per_param,
    )
