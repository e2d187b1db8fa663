"""
评估指标：Pearson 相关、RMSE、log(1+x) 变换
"""

from typing import Optional

import numpy as np

from mjollnir.core.exceptions import DataError, DimensionError, UndefinedCorrelationError


def _pair(a, b, minimum: int):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionError("两个序列长度不一致", axis="length", expected=a.size, actual=b.size)
    if a.size < minimum:
        raise DataError(f"序列长度至少为 {minimum}，实际 {a.size}", length=a.size)
    return a, b


def pearson_r(a, b) -> float:
    """样本 Pearson 相关系数（双精度）；常数序列抛出 UndefinedCorrelationError"""
    a, b = _pair(a, b, 2)
    if np.ptp(a) == 0.0 or np.ptp(b) == 0.0:
        raise UndefinedCorrelationError("常数序列的相关系数无定义")
    da = a - a.mean()
    db = b - b.mean()
    r = np.dot(da, db) / np.sqrt(np.dot(da, da) * np.dot(db, db))
    return float(np.clip(r, -1.0, 1.0))


def pearson_or_none(a, b) -> Optional[float]:
    """报告用：无定义时返回 None"""
    try:
        return pearson_r(a, b)
    except UndefinedCorrelationError:
        return None


def rmse(a, b) -> float:
    a, b = _pair(a, b, 1)
    d = a - b
    return float(np.sqrt(np.mean(d * d)))


def log1p_field(field, mask=None) -> np.ndarray:
    """逐元素 log(1 + x)；有效像素上的负值视为数据错误"""
    x = np.asarray(field, dtype=np.float64)
    valid = np.ones(x.shape, dtype=bool) if mask is None else np.asarray(mask) > 0
    if (valid & (x < 0)).any():
        raise DataError("log1p_field: 有效像素上存在负值")
    return np.log1p(np.where(valid, x, 0.0))
