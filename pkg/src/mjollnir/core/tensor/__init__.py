"""
张量核心

四维张量、可微算子、反向模式求导与有限差分检查。
"""

from mjollnir.core.tensor.tensor import Tensor4, TapeNode, is_grad_enabled, make_result, no_grad
from mjollnir.core.tensor import ops
from mjollnir.core.tensor.gradcheck import GradCheckReport, finite_diff_check

__all__ = [
    "Tensor4",
    "TapeNode",
    "no_grad",
    "is_grad_enabled",
    "make_result",
    "ops",
    "finite_diff_check",
    "GradCheckReport",
]
