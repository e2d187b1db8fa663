"""
异常定义模块

所有模块抛出的异常都继承自 MjollnirError，并携带结构化的 details，
便于结构化日志直接序列化。
"""

from typing import Any, Dict, List, Optional, Sequence


class MjollnirError(Exception):
    """框架基础异常"""

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details

    def to_dict(self) -> Dict[str, Any]:
        return {"type": type(self).__name__, "message": self.message, **self.details}


class DimensionError(MjollnirError):
    """形状/轴不匹配"""

    def __init__(self, message: str, axis: Optional[str] = None, expected: Any = None, actual: Any = None):
        super().__init__(message, axis=axis, expected=expected, actual=actual)
        self.axis = axis
        self.expected = expected
        self.actual = actual


class ConfigurationError(MjollnirError):
    """配置或超参数非法"""


class DataError(MjollnirError):
    """数据内容非法（负值、零方差、空流等）"""


class EmptyMaskError(DataError):
    """掩码全零，Σm == 0"""


class FormatError(MjollnirError):
    """二进制容器格式错误"""

    def __init__(self, message: str, offset: Optional[int] = None, path: Optional[str] = None):
        super().__init__(message, offset=offset, path=path)
        self.offset = offset


class TrainingError(MjollnirError):
    """训练过程中的数值错误"""

    def __init__(self, message: str, parameter: Optional[str] = None):
        super().__init__(message, parameter=parameter)
        self.parameter = parameter


class GradientCheckError(MjollnirError):
    """有限差分检查中目标函数非有限"""

    def __init__(self, message: str, parameter: Optional[str] = None, index: Optional[Sequence[int]] = None):
        super().__init__(message, parameter=parameter, index=None if index is None else list(index))
        self.parameter = parameter
        self.index = index


class CoverageError(MjollnirError):
    """日期覆盖不完整"""

    def __init__(self, message: str, missing_dates: Optional[List[str]] = None):
        super().__init__(message, missing_dates=missing_dates or [])
        self.missing_dates = missing_dates or []


class UndefinedCorrelationError(MjollnirError):
    """常数序列的相关系数无定义"""


class RegionError(MjollnirError):
    """区域为空或无法切分"""


class AlignmentError(MjollnirError):
    """预测与观测日期未对齐"""


__all__ = [
    "MjollnirError",
    "DimensionError",
    "ConfigurationError",
    "DataError",
    "EmptyMaskError",
    "FormatError",
    "TrainingError",
    "GradientCheckError",
    "CoverageError",
    "UndefinedCorrelationError",
    "RegionError",
    "AlignmentError",
]
