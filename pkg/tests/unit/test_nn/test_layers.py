"""
测试复合层：Inception 深度卷积、逐点分组卷积、SE、随机深度与残差块
"""

import numpy as np
import pytest

from mjollnir.core.exceptions import ConfigurationError, DimensionError
from mjollnir.core.nn import (
    InceptionDWParams,
    SEParams,
    drop_path,
    init_params,
    inception_dwconv,
    inception_split,
    mjolnir_block,
    pointwise_group_conv,
    se_block,
)
from mjollnir.core.tensor import Tensor4, finite_diff_check, ops


def scalar_depthwise(x, w, b):
    """单通道逐元素 "same" 填充深度卷积参考"""
    C, H, W = x.shape
    kh, kw = w.shape[2], w.shape[3]
    ph, pw = kh // 2, kw // 2
    out = np.zeros_like(x)
    for c in range(C):
        for i in range(H):
            for j in range(W):
                acc = b[c]
                for u in range(kh):
                    for v in range(kw):
                        ii, jj = i + u - ph, j + v - pw
                        if 0 <= ii < H and 0 <= jj < W:
                            acc += w[c, 0, u, v] * x[c, ii, jj]
                out[c, i, j] = acc
    return out


def make_mixer(rng, split, k):
    c_h, c_v, c_sq, c_id = split

    def branch(c, kh, kw):
        if c == 0:
            return None, None
        return Tensor4(rng.standard_normal((c, 1, kh, kw))), Tensor4(rng.standard_normal((1, c, 1, 1)))

    h = branch(c_h, 1, k)
    v = branch(c_v, k, 1)
    s = branch(c_sq, 3, 3)
    return InceptionDWParams(h[0], h[1], v[0], v[1], s[0], s[1], identity_channels=c_id)


class TestInceptionDWConv:
    """Inception 深度卷积测试"""

    def test_default_split(self):
        """测试默认切分 floor(C/8) 三份，其余恒等"""
        assert inception_split(8) == (1, 1, 1, 5)
        assert inception_split(48) == (6, 6, 6, 30)
        assert inception_split(4) == (0, 0, 0, 4)

    def test_matches_per_branch_oracle(self, rng):
        """测试 (1,8,6,6)、k_band=5 与逐分支参考实现一致"""
        params = make_mixer(rng, (2, 2, 2, 2), 5)
        x = rng.standard_normal((1, 8, 6, 6))
        out = inception_dwconv(Tensor4(x), params).values[0]
        expected = np.concatenate([
            scalar_depthwise(x[0, 0:2], params.band_h_weight.values, params.band_h_bias.values.ravel()),
            scalar_depthwise(x[0, 2:4], params.band_v_weight.values, params.band_v_bias.values.ravel()),
            scalar_depthwise(x[0, 4:6], params.square_weight.values, params.square_bias.values.ravel()),
            x[0, 6:8],
        ])
        np.testing.assert_allclose(out, expected, rtol=1e-10, atol=1e-12)

    def test_zero_kernels_keep_identity_branch(self, rng):
        """测试卷积核全零时卷积分支为零、恒等分支不变"""
        zero = lambda c, kh, kw: Tensor4(np.zeros((c, 1, kh, kw)))  # noqa: E731
        zb = lambda c: Tensor4(np.zeros((1, c, 1, 1)))  # noqa: E731
        params = InceptionDWParams(zero(1, 1, 11), zb(1), zero(1, 11, 1), zb(1), zero(1, 3, 3), zb(1), identity_channels=5)
        x = rng.standard_normal((2, 8, 4, 4))
        out = inception_dwconv(Tensor4(x), params).values
        assert not out[:, :3].any()
        np.testing.assert_array_equal(out[:, 3:], x[:, 3:])

    def test_identity_only(self, rng):
        """测试只有恒等分支时输出等于输入"""
        params = InceptionDWParams(None, None, None, None, None, None, identity_channels=4)
        x = rng.standard_normal((1, 4, 3, 3))
        np.testing.assert_array_equal(inception_dwconv(Tensor4(x), params).values, x)

    def test_channel_mismatch(self, rng):
        """测试输入通道与分支之和不符"""
        params = make_mixer(rng, (1, 1, 1, 5), 3)
        with pytest.raises(DimensionError):
            inception_dwconv(Tensor4.zeros((1, 7, 3, 3)), params)


class TestPointwiseGroupConv:
    """逐点分组卷积测试"""

    def test_identity_weights(self, rng):
        """测试单位矩阵权重"""
        x = rng.standard_normal((1, 3, 2, 2))
        out = pointwise_group_conv(Tensor4(x), Tensor4(np.eye(3).reshape(3, 3, 1, 1)))
        np.testing.assert_array_equal(out.values, x)

    def test_groups_equal_channels(self, rng):
        """测试 groups=C 退化为逐通道数乘"""
        x = rng.standard_normal((1, 3, 2, 2))
        w = rng.standard_normal((3, 1, 1, 1))
        out = pointwise_group_conv(Tensor4(x), Tensor4(w), groups=3)
        np.testing.assert_allclose(out.values, x * w.reshape(1, 3, 1, 1), rtol=1e-12)

    def test_block_diagonal_oracle(self, rng):
        """测试 groups=2 与块对角矩阵乘法一致"""
        x = rng.standard_normal((1, 4, 2, 2))
        w = rng.standard_normal((4, 2, 1, 1))
        dense = np.zeros((4, 4))
        dense[0:2, 0:2] = w[0:2, :, 0, 0]
        dense[2:4, 2:4] = w[2:4, :, 0, 0]
        expected = np.einsum("oc,bchw->bohw", dense, x)
        out = pointwise_group_conv(Tensor4(x), Tensor4(w), groups=2)
        np.testing.assert_allclose(out.values, expected, rtol=1e-10, atol=1e-12)

    def test_indivisible_groups(self):
        """测试通道数不能被分组整除"""
        with pytest.raises(DimensionError):
            pointwise_group_conv(Tensor4.zeros((1, 3, 2, 2)), Tensor4.zeros((4, 1, 1, 1)), groups=2)

    def test_rejects_spatial_kernel(self):
        """测试非 1×1 卷积核被拒绝"""
        with pytest.raises(DimensionError):
            pointwise_group_conv(Tensor4.zeros((1, 2, 3, 3)), Tensor4.zeros((2, 2, 3, 3)))


class TestSEBlock:
    """SE 通道注意力测试"""

    def test_zero_weights_halve_input(self, rng):
        """测试 W1=W2=0 时 e=0.5，输出为输入的一半"""
        params = SEParams(w1=Tensor4(np.zeros((1, 4, 1, 1))), w2=Tensor4(np.zeros((4, 1, 1, 1))))
        x = rng.standard_normal((2, 4, 3, 3))
        np.testing.assert_allclose(se_block(Tensor4(x), params).values, 0.5 * x)

    def test_zero_input(self, rng):
        """测试全零输入输出全零"""
        params = SEParams(w1=Tensor4(rng.standard_normal((2, 4, 1, 1))), w2=Tensor4(rng.standard_normal((4, 2, 1, 1))))
        assert not se_block(Tensor4.zeros((1, 4, 3, 3)), params).values.any()

    def test_scalar_reference(self, rng):
        """测试与逐步挤压-激励参考实现一致"""
        x = rng.standard_normal((1, 4, 3, 3))
        w1 = rng.standard_normal((2, 4))
        w2 = rng.standard_normal((4, 2))
        params = SEParams(w1=Tensor4(w1.reshape(2, 4, 1, 1)), w2=Tensor4(w2.reshape(4, 2, 1, 1)))
        s = [sum(x[0, c, i, j] for i in range(3) for j in range(3)) / 9.0 for c in range(4)]
        hidden = [max(0.0, sum(w1[r, c] * s[c] for c in range(4))) for r in range(2)]
        e = [1.0 / (1.0 + np.exp(-sum(w2[c, r] * hidden[r] for r in range(2)))) for c in range(4)]
        expected = x * np.array(e).reshape(1, 4, 1, 1)
        np.testing.assert_allclose(se_block(Tensor4(x), params).values, expected, rtol=1e-10)

    def test_gradient(self, rng):
        """测试 SE 梯度（隐藏层激活保持为正）"""
        x = Tensor4(rng.uniform(0.5, 1.5, (1, 4, 3, 3)), name="x")
        w1 = Tensor4(rng.uniform(0.5, 1.0, (1, 4, 1, 1)), name="w1")
        w2 = Tensor4(rng.standard_normal((4, 1, 1, 1)), name="w2")
        r = rng.standard_normal((1, 4, 3, 3))
        params = SEParams(w1=w1, w2=w2)
        report = finite_diff_check(lambda: ops.sum_all(ops.mul(se_block(x, params), Tensor4(r))), [x, w1, w2])
        assert report.passed, report.summary()


class TestDropPath:
    """随机深度测试"""

    def test_zero_probability_is_identity(self, rng):
        """测试 p=0 在两种模式下都是恒等"""
        x = Tensor4(rng.standard_normal((4, 2, 2, 2)))
        assert drop_path(x, 0.0, training=True, rng=rng) is x
        assert drop_path(x, 0.0, training=False) is x

    def test_eval_mode_is_identity(self, rng):
        """测试评估模式下任意 p 都是恒等"""
        x = Tensor4(rng.standard_normal((4, 2, 2, 2)))
        assert drop_path(x, 0.7, training=False) is x

    def test_expectation_preserved(self):
        """测试丢弃比例约为 p，期望保持不变"""
        p = 0.3
        x = Tensor4(np.ones((20000, 1, 1, 1)))
        out = drop_path(x, p, training=True, rng=np.random.default_rng(0)).values.ravel()
        assert abs(np.mean(out == 0.0) - p) < 0.02
        assert abs(out.mean() - 1.0) < 0.03
        np.testing.assert_allclose(out[out > 0], 1.0 / (1.0 - p))

    def test_same_seed_same_mask(self):
        """测试同一种子得到同一丢弃模式"""
        x = Tensor4(np.ones((64, 1, 1, 1)))
        a = drop_path(x, 0.5, True, np.random.default_rng([1, 2, 3])).values
        b = drop_path(x, 0.5, True, np.random.default_rng([1, 2, 3])).values
        np.testing.assert_array_equal(a, b)

    def test_invalid_probability(self):
        """测试 p >= 1 被拒绝"""
        with pytest.raises(ConfigurationError):
            drop_path(Tensor4.ones((1, 1, 1, 1)), 1.0, training=True, rng=np.random.default_rng(0))

    def test_training_requires_rng(self):
        """测试训练模式必须提供随机源"""
        with pytest.raises(ConfigurationError):
            drop_path(Tensor4.ones((1, 1, 1, 1)), 0.5, training=True)


class TestMjolnirBlock:
    """残差块测试"""

    def _block(self, make_tiny_config, **overrides):
        config = make_tiny_config(**overrides)
        params = init_params(config, seed=5, dtype=np.float64)
        return params.stages[1].blocks[0]

    def test_shape_preserved(self, make_tiny_config, rng):
        """测试输出形状与输入一致"""
        block = self._block(make_tiny_config)
        x = Tensor4(rng.standard_normal((2, 8, 5, 7)))
        assert mjolnir_block(x, block).dims == (2, 8, 5, 7)

    def test_zero_gamma_is_identity(self, make_tiny_config, rng):
        """测试 γ=0 时块为恒等映射"""
        block = self._block(make_tiny_config, layer_scale_init=0.0)
        x = rng.standard_normal((1, 8, 4, 4))
        np.testing.assert_array_equal(mjolnir_block(Tensor4(x), block).values, x)

    def test_width_mismatch(self, make_tiny_config):
        """测试输入通道与块宽度不符"""
        block = self._block(make_tiny_config)
        with pytest.raises(DimensionError):
            mjolnir_block(Tensor4.zeros((1, 4, 3, 3)), block)

    @pytest.mark.parametrize("placement", ["pre", "post_dwconv"])
    def test_gradient(self, make_tiny_config, rng, placement):
        """测试两种归一化位置下整块梯度"""
        block = self._block(make_tiny_config, layer_scale_init=0.5, pointwise_groups=2, block_norm_placement=placement)
        x = Tensor4(rng.standard_normal((1, 8, 4, 5)), name="x")
        r = rng.standard_normal((1, 8, 4, 5))
        named = dict(block.named_tensors())
        named["x"] = x
        report = finite_diff_check(
            lambda: ops.sum_all(ops.mul(mjolnir_block(x, block), Tensor4(r))), named, max_coords=4,
        )
        assert report.passed, report.summary()
