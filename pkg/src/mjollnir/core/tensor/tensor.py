"""
张量核心 - 四维稠密张量与反向模式自动微分

Tensor4 是全框架通用的值类型，维度固定为 (B, C, H, W)。
偏置、归一化仿射参数等向量以 (1, C, 1, 1) 存放，标量以 (1, 1, 1, 1) 存放。
"""

from contextlib import contextmanager
from contextvars import ContextVar
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from mjollnir.core.exceptions import DimensionError

# 是否记录计算图
_grad_enabled: ContextVar[bool] = ContextVar("grad_enabled", default=True)

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@contextmanager
def no_grad() -> Iterator[None]:
    """在上下文内不记录计算图（评估模式前向使用）"""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


class TapeNode:
    """计算图节点：算子名、输入引用和反向规则（闭包保存所需激活）"""

    __slots__ = ("op", "inputs", "backward_fn")

    def __init__(self, op: str, inputs: Tuple["Tensor4", ...], backward_fn: BackwardFn):
        self.op = op
        self.inputs = inputs
        self.backward_fn = backward_fn

    def __repr__(self) -> str:
        return f"TapeNode(op={self.op!r}, inputs={len(self.inputs)})"


class Tensor4:
    """四维张量 (B, C, H, W)，带可选梯度槽"""

    __slots__ = ("values", "grad", "requires_grad", "node", "name")

    def __init__(
        self,
        values,
        requires_grad: bool = False,
        name: Optional[str] = None,
        dtype=None,
    ):
        arr = np.asarray(values, dtype=dtype)
        if arr.ndim != 4:
            raise DimensionError(
                f"Tensor4 需要四维数组，实际为 {arr.ndim} 维",
                axis="rank", expected=4, actual=arr.ndim,
            )
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.values: np.ndarray = np.ascontiguousarray(arr)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.node: Optional[TapeNode] = None
        self.name = name

    # ---- 构造 ----

    @classmethod
    def zeros(cls, dims: Tuple[int, int, int, int], dtype=np.float64, **kwargs) -> "Tensor4":
        return cls(np.zeros(dims, dtype=dtype), **kwargs)

    @classmethod
    def ones(cls, dims: Tuple[int, int, int, int], dtype=np.float64, **kwargs) -> "Tensor4":
        return cls(np.ones(dims, dtype=dtype), **kwargs)

    @classmethod
    def from_vector(cls, vector, dtype=None, **kwargs) -> "Tensor4":
        """长度为 C 的向量 -> (1, C, 1, 1)"""
        vec = np.asarray(vector, dtype=dtype)
        if vec.ndim != 1:
            raise DimensionError("from_vector 需要一维向量", axis="rank", expected=1, actual=vec.ndim)
        return cls(vec.reshape(1, -1, 1, 1), **kwargs)

    @classmethod
    def scalar(cls, value: float, dtype=np.float64, **kwargs) -> "Tensor4":
        return cls(np.full((1, 1, 1, 1), value, dtype=dtype), **kwargs)

    # ---- 属性 ----

    @property
    def dims(self) -> Tuple[int, int, int, int]:
        return self.values.shape  # type: ignore[return-value]

    shape = dims

    @property
    def dtype(self):
        return self.values.dtype

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def is_leaf(self) -> bool:
        return self.node is None

    def item(self) -> float:
        if self.values.size != 1:
            raise DimensionError("item() 只适用于单元素张量", axis="size", expected=1, actual=self.values.size)
        return float(self.values.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.values

    def detach(self) -> "Tensor4":
        return Tensor4(self.values, requires_grad=False, name=self.name)

    def astype(self, dtype) -> "Tensor4":
        """转换精度，得到新的叶子张量"""
        return Tensor4(self.values.astype(dtype), requires_grad=self.requires_grad, name=self.name)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor4(dims={self.dims}, dtype={self.dtype}{label}, requires_grad={self.requires_grad})"

    # ---- 运算符 ----

    def __add__(self, other):
        from mjollnir.core.tensor import ops
        return ops.add(self, _as_tensor(other, self.dtype))

    __radd__ = __add__

    def __sub__(self, other):
        from mjollnir.core.tensor import ops
        return ops.sub(self, _as_tensor(other, self.dtype))

    def __mul__(self, other):
        from mjollnir.core.tensor import ops
        if isinstance(other, (int, float)):
            return ops.scale(self, float(other))
        return ops.mul(self, _as_tensor(other, self.dtype))

    __rmul__ = __mul__

    def __neg__(self):
        from mjollnir.core.tensor import ops
        return ops.scale(self, -1.0)

    # ---- 反向传播 ----

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """
        反向模式求导：按逆拓扑序访问每个节点恰好一次，
        梯度累加到参与计算的叶子张量的 grad 上。
        """
        if grad is None:
            if self.values.size != 1:
                raise DimensionError(
                    "非标量张量反向传播需要显式给出上游梯度",
                    axis="size", expected=1, actual=self.values.size,
                )
            grad = np.ones_like(self.values)
        elif grad.shape != self.values.shape:
            raise DimensionError("上游梯度形状不匹配", axis="grad", expected=self.dims, actual=grad.shape)

        order = _topological_order(self)
        grads = {id(self): grad}
        for tensor in reversed(order):
            g = grads.pop(id(tensor), None)
            if tensor.node is None:
                if tensor.requires_grad:
                    if g is None:
                        g = np.zeros_like(tensor.values)
                    g = g.astype(tensor.values.dtype, copy=False)
                    tensor.grad = g.copy() if tensor.grad is None else tensor.grad + g
                continue
            if g is None:
                continue
            input_grads = tensor.node.backward_fn(g)
            for inp, ig in zip(tensor.node.inputs, input_grads):
                if ig is None or not inp.requires_grad:
                    continue
                ig = ig.astype(inp.values.dtype, copy=False)
                prev = grads.get(id(inp))
                grads[id(inp)] = ig if prev is None else prev + ig


def _topological_order(root: Tensor4) -> List[Tensor4]:
    """后序遍历（迭代实现），输入排在输出之前"""
    order: List[Tensor4] = []
    visited = set()
    stack: List[Tuple[Tensor4, bool]] = [(root, False)]
    while stack:
        tensor, expanded = stack.pop()
        if expanded:
            order.append(tensor)
            continue
        if id(tensor) in visited:
            continue
        visited.add(id(tensor))
        stack.append((tensor, True))
        if tensor.node is not None:
            for inp in reversed(tensor.node.inputs):
                if inp.requires_grad and id(inp) not in visited:
                    stack.append((inp, False))
    return order


def _as_tensor(value, dtype) -> Tensor4:
    if isinstance(value, Tensor4):
        return value
    return Tensor4(np.full((1, 1, 1, 1), value, dtype=dtype))


def make_result(
    values: np.ndarray,
    op: str,
    inputs: Sequence[Tensor4],
    backward_fn: BackwardFn,
) -> Tensor4:
    """构造算子输出；需要梯度且处于记录模式时挂上计算图节点"""
    out = Tensor4(values)
    if _grad_enabled.get() and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.node = TapeNode(op, tuple(inputs), backward_fn)
    return out
