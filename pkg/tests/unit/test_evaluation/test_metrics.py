"""
测试评估指标
"""

import math

import numpy as np
import pytest
from scipy.stats import pearsonr

from mjollnir.core.evaluation import log1p_field, pearson_or_none, pearson_r, rmse
from mjollnir.core.exceptions import DataError, DimensionError, UndefinedCorrelationError


class TestPearson:
    """Pearson 相关测试"""

    def test_matches_scipy(self, rng):
        """测试与 scipy 的实现一致"""
        for _ in range(20):
            a = rng.standard_normal(50)
            b = 0.3 * a + rng.standard_normal(50)
            assert pearson_r(a, b) == pytest.approx(pearsonr(a, b)[0], abs=1e-12)

    def test_perfect_linear(self):
        """测试正/负线性关系"""
        a = np.arange(10.0)
        assert pearson_r(a, 3.0 * a + 1.0) == pytest.approx(1.0)
        assert pearson_r(a, -a) == pytest.approx(-1.0)

    def test_constant_series(self):
        """测试常数序列无定义"""
        with pytest.raises(UndefinedCorrelationError):
            pearson_r([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
        assert pearson_or_none([1.0, 2.0], [5.0, 5.0]) is None

    def test_invalid_lengths(self):
        """测试长度不一致或过短"""
        with pytest.raises(DimensionError):
            pearson_r([1.0, 2.0], [1.0, 2.0, 3.0])
        with pytest.raises(DataError):
            pearson_r([1.0], [2.0])


class TestRmseAndLog1p:
    """RMSE 与 log(1+x) 测试"""

    def test_rmse(self):
        """测试 RMSE 手算值"""
        assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(math.sqrt(12.5))
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_log1p(self):
        """测试逐元素 log(1 + x)"""
        np.testing.assert_allclose(log1p_field([0.0, math.e - 1.0]), [0.0, 1.0])

    def test_log1p_negative(self):
        """测试有效像素为负报错，被屏蔽的负值记为 0"""
        with pytest.raises(DataError):
            log1p_field([-0.5, 1.0])
        np.testing.assert_array_equal(log1p_field([-0.5, 0.0], mask=[0, 1]), [0.0, 0.0])
