"""
Tests for encoder blocks.
"""
import math
import numpy as np
import numpy.testing as npt
import unittest

from hxseg import ConfigError, DivisibilityError, ShapeError
from hxseg.autograd import Tensor
from hxseg.autograd.gradcheck import grad_check
from .. import ChannelNorm, get_conv_blocks, resolve_conv_block
from ..blocks import (DWFFN, EMSA, FusedMBConv, FusedMBConvSE, MBConv,
                      naive_attention, TransformerBlock)


def zero_parameters(module):
    """Set every parameter of a module to zero."""
    for param in module.parameters():
        param.data[...] = 0.


def randomize_parameters(module, rng, scale=0.5):
    """Replace every parameter with seeded normal values."""
    for param in module.parameters():
        param.data[...] = rng.normal(scale=scale, size=param.shape)


def set_identity(linear):
    """Make a Linear layer the identity map."""
    linear.weight.data[...] = np.eye(linear.weight.shape[0])
    linear.bias.data[...] = 0.


def gelu(x):
    return 0.5 * x * (1. + np.vectorize(math.erf)(x / math.sqrt(2.)))


def standardize(x, eps=1e-5):
    """Per-channel standardization over spatial positions."""
    mean = x.mean(axis=(0, 1))
    var = ((x - mean) ** 2).mean(axis=(0, 1))
    return (x - mean) / np.sqrt(var + eps)


def loop_attention(q, k, v):
    """Triple-loop softmax(Q K^T / sqrt(c)) V."""
    n, c = q.shape
    out = np.zeros((n, v.shape[1]))
    for i in range(n):
        scores = np.zeros(k.shape[0])
        for j in range(k.shape[0]):
            for ch in range(c):
                scores[j] += q[i, ch] * k[j, ch]
        scores /= math.sqrt(c)
        weights = np.exp(scores - scores.max())
        weights /= weights.sum()
        for j in range(k.shape[0]):
            out[i] += weights[j] * v[j]
    return out


def weighted_loss(module, shape, rng):
    """Fixed random weighting of a module's output, summed."""
    weights = Tensor(rng.choice([-1., 1.], size=shape) *
                     rng.uniform(0.5, 1.5, size=shape))
    return lambda x: (module(x) * weights).sum()


class TestRegistry(unittest.TestCase):
    """
    Tests for the conv-block registry.
    """
    def test_variants(self):
        """
        Every conv-block variant is registered by name.
        """
        blocks = get_conv_blocks()
        assert blocks == {'plain': FusedMBConv, 'with_se': FusedMBConvSE,
                          'mbconv': MBConv}

    def test_unknown_variant(self):
        """
        Unknown variant names are rejected.
        """
        with self.assertRaises(ConfigError):
            resolve_conv_block('ghost')


class TestFusedMBConv(unittest.TestCase):
    """
    Tests for Fused-MBConv blocks.
    """
    def setUp(self):
        """
        Set up tests.
        """
        self.rng = np.random.RandomState(0)

    def test_residual_identity(self):
        """
        With all parameters zeroed every variant is the identity.
        """
        x = Tensor(self.rng.randn(5, 4, 6))
        for klass in [FusedMBConv, FusedMBConvSE, MBConv]:
            block = klass(6, self.rng)
            zero_parameters(block)
            npt.assert_array_equal(block(x).numpy(), x.numpy())

    def test_expansion(self):
        """
        Hidden features carry twice the input channels.
        """
        block = FusedMBConv(8, self.rng)
        hidden = block.expanded(Tensor(self.rng.randn(3, 3, 8)))
        assert hidden.shape == (3, 3, 16)

    def test_parameter_count(self):
        """
        c = 8: expand 3x3x8x16 + 16, project 16x8 + 8, two affine norms.
        """
        block = FusedMBConv(8, self.rng)
        expected = (3 * 3 * 8 * 16 + 16) + (16 * 8 + 8) + 2 * 16 + 2 * 8
        assert block.num_parameters() == expected == 1352

    def hand_block(self):
        """
        Fused-MBConv on 2 channels with hand-set parameters: only the centre
        tap of the expansion kernel is nonzero. Returns (block, expand,
        project).
        """
        block = FusedMBConv(2, self.rng)
        expand = self.rng.randn(2, 4)
        block.expand.weight.data[...] = 0.
        block.expand.weight.data[1, 1] = expand
        block.expand.bias.data[...] = [0.1, -0.2, 0.3, 0.]
        block.norm.gamma.data[...] = [1., 2., 0.5, 1.5]
        block.norm.beta.data[...] = [0., 0.1, -0.1, 0.2]
        project = self.rng.randn(4, 2)
        block.project.weight.data[...] = project
        block.project.bias.data[...] = [0.5, -0.5]
        block.norm2.gamma.data[...] = [0.7, 1.3]
        block.norm2.beta.data[...] = [0.05, -0.05]
        return block, expand, project

    def test_hand_chain(self):
        """
        Matches expand -> norm -> GELU -> project -> norm -> add on the
        single-pixel map [[[0.5, -1.0]]] with the initial running statistics
        (mean 0, variance 1).
        """
        block, expand, project = self.hand_block()
        scale = 1. / math.sqrt(1. + 1e-5)
        x = np.array([[[0.5, -1.]]])
        hidden = x.dot(expand) + [0.1, -0.2, 0.3, 0.]
        hidden = hidden * scale * [1., 2., 0.5, 1.5] + [0., 0.1, -0.1, 0.2]
        out = gelu(hidden).dot(project) + [0.5, -0.5]
        out = out * scale * [0.7, 1.3] + [0.05, -0.05]
        result = block(Tensor(x)).numpy()
        assert result.shape == (1, 1, 2)
        npt.assert_allclose(result, x + out, atol=1e-12)
        assert not np.allclose(result, x)

    def test_hand_chain_running_statistics(self):
        """
        Stored running statistics replace the initial ones at inference.
        """
        block, expand, project = self.hand_block()
        block.norm.running_mean.data[...] = [0.2, -0.1, 0., 0.4]
        block.norm.running_var.data[...] = [0.5, 2., 1., 4.]
        block.norm2.running_mean.data[...] = [-0.3, 0.6]
        block.norm2.running_var.data[...] = [1.5, 0.25]
        x = np.array([[[0.5, -1.]]])
        hidden = x.dot(expand) + [0.1, -0.2, 0.3, 0.]
        hidden = ((hidden - [0.2, -0.1, 0., 0.4]) /
                  np.sqrt(np.array([0.5, 2., 1., 4.]) + 1e-5))
        hidden = hidden * [1., 2., 0.5, 1.5] + [0., 0.1, -0.1, 0.2]
        out = gelu(hidden).dot(project) + [0.5, -0.5]
        out = (out - [-0.3, 0.6]) / np.sqrt(np.array([1.5, 0.25]) + 1e-5)
        out = out * [0.7, 1.3] + [0.05, -0.05]
        npt.assert_allclose(block(Tensor(x)).numpy(), x + out, atol=1e-12)

    def test_seed_dependence(self):
        """
        Freshly built blocks with different seeds give different outputs on
        a single pixel, and neither is the identity.
        """
        x = Tensor(np.array([[[0.5, -1.]]]))
        a = FusedMBConv(2, np.random.RandomState(0))(x).numpy()
        b = FusedMBConv(2, np.random.RandomState(1))(x).numpy()
        assert not np.allclose(a, b)
        assert not np.allclose(a, x.numpy())
        assert not np.allclose(b, x.numpy())

    def test_tiles_independent_of_content(self):
        """
        At inference each pixel's output depends only on its neighbourhood,
        so a sub-window's interior matches the full map's interior.
        """
        block = FusedMBConv(3, self.rng)
        randomize_parameters(block, self.rng)
        x = self.rng.randn(8, 8, 3)
        full = block(Tensor(x)).numpy()
        window = block(Tensor(x[:5, :5])).numpy()
        npt.assert_allclose(window[:4, :4], full[:4, :4], atol=1e-12)

    def test_hand_chain_training(self):
        """
        In training mode the norms use the map statistics: matches the chain
        on a 2x1x2 map with a centre-tap expansion kernel.
        """
        block, expand, project = self.hand_block()
        block.train()
        x = np.array([[[1., -2.]], [[0.5, 3.]]])
        hidden = x.dot(expand) + [0.1, -0.2, 0.3, 0.]
        hidden = standardize(hidden) * [1., 2., 0.5, 1.5] + [0., 0.1, -0.1,
                                                              0.2]
        out = gelu(hidden).dot(project) + [0.5, -0.5]
        out = standardize(out) * [0.7, 1.3] + [0.05, -0.05]
        npt.assert_allclose(block(Tensor(x)).numpy(), x + out, atol=1e-12)

    def test_channel_mismatch(self):
        """
        Inputs with the wrong channel count are rejected.
        """
        for klass in [FusedMBConv, MBConv]:
            with self.assertRaises(ValueError):
                klass(4, self.rng)(Tensor(np.ones((3, 3, 5))))

    def test_grad_check(self):
        """
        Every variant passes a gradient check at 1e-4 over all parameters,
        in both modes.
        """
        for klass in [FusedMBConv, FusedMBConvSE, MBConv]:
            for training in [False, True]:
                block = klass(4, self.rng).train(training)
                randomize_parameters(block, self.rng)
                x = Tensor(self.rng.randn(4, 4, 4))
                func = weighted_loss(block, (4, 4, 4), self.rng)
                inputs = [x] + block.parameters()
                report = grad_check(lambda *args: func(args[0]), inputs,
                                    n_samples=150, atol=1e-7)
                assert report.max_rel_error < 1e-4, (klass.name, training,
                                                     report)


class TestChannelNorm(unittest.TestCase):
    """
    Tests for batch-style channel normalization.
    """
    def setUp(self):
        """
        Set up tests.
        """
        self.rng = np.random.RandomState(4)
        self.norm = ChannelNorm(3)
        self.norm.gamma.data[...] = [1.5, 0.5, -1.]
        self.norm.beta.data[...] = [0.1, 0., -0.2]

    def test_initial_state(self):
        """
        Built in inference mode with running mean 0 and variance 1.
        """
        assert not self.norm.training
        npt.assert_array_equal(self.norm.running_mean.data, np.zeros(3))
        npt.assert_array_equal(self.norm.running_var.data, np.ones(3))
        assert list(self.norm.named_buffers()) == ['running_mean',
                                                   'running_var']

    def test_inference(self):
        """
        Inference normalizes with the running statistics, pixel by pixel.
        """
        self.norm.running_mean.data[...] = [0.5, -1., 2.]
        self.norm.running_var.data[...] = [4., 0.25, 1.]
        x = self.rng.randn(4, 5, 3)
        expected = ((x - [0.5, -1., 2.]) /
                    np.sqrt(np.array([4., 0.25, 1.]) + 1e-5) *
                    [1.5, 0.5, -1.] + [0.1, 0., -0.2])
        out = self.norm(Tensor(x)).numpy()
        npt.assert_allclose(out, expected, atol=1e-12)
        npt.assert_allclose(self.norm(Tensor(x[2:3, 1:2])).numpy(),
                            out[2:3, 1:2], atol=1e-15)

    def test_training_updates_statistics(self):
        """
        Training mode uses the map statistics and moves the running ones by
        momentum 0.1 (unbiased variance).
        """
        self.norm.train()
        x = self.rng.randn(4, 5, 3) * [1., 2., 0.5] + [0., 1., -1.]
        out = self.norm(Tensor(x)).numpy()
        npt.assert_allclose(out, standardize(x) * [1.5, 0.5, -1.] +
                            [0.1, 0., -0.2], atol=1e-12)
        mean = x.mean(axis=(0, 1))
        var = x.reshape(-1, 3).var(axis=0, ddof=1)
        npt.assert_allclose(self.norm.running_mean.data, 0.1 * mean)
        npt.assert_allclose(self.norm.running_var.data, 0.9 + 0.1 * var)
        self.norm(Tensor(x))
        npt.assert_allclose(self.norm.running_mean.data, 0.19 * mean)
        npt.assert_allclose(self.norm.running_var.data,
                            0.81 + 0.19 * var)

    def test_single_pixel_training(self):
        """
        Training on a 1x1 map is rejected and leaves the statistics alone;
        inference on it is fine.
        """
        self.norm.train()
        with self.assertRaises(ShapeError):
            self.norm(Tensor(np.ones((1, 1, 3))))
        npt.assert_array_equal(self.norm.running_mean.data, np.zeros(3))
        self.norm.eval()
        npt.assert_allclose(
            self.norm(Tensor(np.ones((1, 1, 3)))).numpy().ravel(),
            np.ones(3) / np.sqrt(1. + 1e-5) * [1.5, 0.5, -1.] +
            [0.1, 0., -0.2], atol=1e-12)

    def test_mode_propagation(self):
        """
        train() and eval() reach every normalization in a block.
        """
        block = MBConv(4, self.rng)
        norms = [block.norm, block.norm_dw, block.norm2]
        assert block.train() is block
        assert all(norm.training for norm in norms)
        assert block.eval() is block
        assert not any(norm.training for norm in norms)


class TestNaiveAttention(unittest.TestCase):
    """
    Tests for naive_attention.
    """
    def setUp(self):
        """
        Set up tests.
        """
        self.rng = np.random.RandomState(1)

    def test_singleton(self):
        """
        A single key returns its value regardless of Q and K.
        """
        v = self.rng.randn(1, 3)
        out = naive_attention(self.rng.randn(1, 3), self.rng.randn(1, 3), v)
        npt.assert_allclose(out.numpy(), v, atol=1e-15)

    def test_identical_keys(self):
        """
        Identical keys give the mean of the values.
        """
        k = np.tile(self.rng.randn(1, 4), (5, 1))
        v = self.rng.randn(5, 4)
        out = naive_attention(self.rng.randn(3, 4), k, v)
        npt.assert_allclose(out.numpy(), np.tile(v.mean(axis=0), (3, 1)),
                            atol=1e-12)

    def test_loop_oracle(self):
        """
        Matches a triple-loop evaluation on random 4x2 inputs.
        """
        q, k, v = [self.rng.randn(4, 2) for _ in range(3)]
        npt.assert_allclose(naive_attention(q, k, v).numpy(),
                            loop_attention(q, k, v), atol=1e-12)


class TestEMSA(unittest.TestCase):
    """
    Tests for efficient multi-head self-attention.
    """
    def setUp(self):
        """
        Set up tests.
        """
        self.rng = np.random.RandomState(2)

    def test_naive_equivalence(self):
        """
        R = 1 with identity reduction and output layers equals dense
        attention on the projected Q, K, V.
        """
        shapes = [(8, 8, 16), (4, 6, 8), (2, 2, 4), (8, 4, 16), (5, 3, 6)]
        for seed in range(20):
            rng = np.random.RandomState(seed)
            h, w, c = shapes[seed % len(shapes)]
            heads = 2 if seed % 2 else 1
            attn = EMSA(c, heads, 1, rng)
            randomize_parameters(attn, rng)
            for layer in [attn.k_reduce, attn.v_reduce, attn.out]:
                set_identity(layer)
            x = rng.randn(h, w, c)
            tokens = Tensor(x.reshape(h * w, c))
            expected = naive_attention(attn.q(tokens), attn.k(tokens),
                                       attn.v(tokens), heads=heads)
            npt.assert_allclose(attn(Tensor(x)).numpy(),
                                expected.numpy().reshape(h, w, c), atol=1e-5)
            if heads == 1:
                npt.assert_allclose(
                    expected.numpy(),
                    loop_attention(attn.q(tokens).numpy(),
                                   attn.k(tokens).numpy(),
                                   attn.v(tokens).numpy()), atol=1e-10)

    def test_reduced_sequence(self):
        """
        8x8x16 input with R = 4 attends over 16 reduced keys.
        """
        attn = EMSA(16, 2, 4, self.rng)
        out, weights = attn(Tensor(self.rng.randn(8, 8, 16)),
                            return_attention=True)
        assert out.shape == (8, 8, 16)
        assert weights.shape == (2, 64, 16)
        npt.assert_allclose(weights.numpy().sum(axis=-1), 1., atol=1e-6)

    def test_zero_queries(self):
        """
        Zero queries give uniform attention over the reduced values.
        """
        attn = EMSA(8, 2, 4, self.rng)
        randomize_parameters(attn, self.rng)
        attn.q.weight.data[...] = 0.
        attn.q.bias.data[...] = 0.
        x = Tensor(self.rng.randn(4, 4, 8))
        values = attn.reduce(attn.v(x.reshape(16, 8)), attn.v_reduce)
        expected = attn.out(values.mean(axis=0)).numpy()
        npt.assert_allclose(attn(x).numpy(),
                            np.tile(expected, (4, 4, 1)), atol=1e-12)

    def test_not_divisible(self):
        """
        Sequence lengths not divisible by R are rejected.
        """
        attn = EMSA(4, 1, 4, self.rng)
        with self.assertRaises(DivisibilityError):
            attn(Tensor(np.ones((3, 3, 4))))

    def test_heads_must_divide(self):
        """
        Channels must be divisible by heads.
        """
        with self.assertRaises(ConfigError):
            EMSA(6, 4, 1, self.rng)


class TestTransformerBlock(unittest.TestCase):
    """
    Tests for the transformer block and DWFFN.
    """
    def setUp(self):
        """
        Set up tests.
        """
        self.rng = np.random.RandomState(3)

    def test_residual_identity(self):
        """
        With all parameters zeroed the block is the identity.
        """
        block = TransformerBlock(8, 2, 4, self.rng)
        zero_parameters(block)
        x = Tensor(self.rng.randn(4, 4, 8))
        npt.assert_array_equal(block(x).numpy(), x.numpy())

    def test_shape(self):
        """
        6x6x8 in, 6x6x8 out.
        """
        block = TransformerBlock(8, 2, 4, self.rng)
        assert block(Tensor(self.rng.randn(6, 6, 8))).shape == (6, 6, 8)

    def test_ffn_expansion(self):
        """
        The feed-forward network expands channels by 2.
        """
        block = TransformerBlock(8, 1, 1, self.rng)
        assert block.ffn.fc1.weight.shape == (8, 16)
        assert block.ffn.fc2.weight.shape == (16, 8)

    def test_depthwise_separation(self):
        """
        Perturbing one expanded channel leaves the other depthwise outputs
        unchanged.
        """
        ffn = DWFFN(4, 8, 4, self.rng)
        randomize_parameters(ffn, self.rng)
        hidden = ffn.fc1(Tensor(self.rng.randn(5, 5, 4))).numpy()
        perturbed = hidden.copy()
        perturbed[..., 3] += self.rng.randn(5, 5)
        a = ffn.depthwise(Tensor(hidden)).numpy()
        b = ffn.depthwise(Tensor(perturbed)).numpy()
        npt.assert_array_equal(np.delete(a, 3, axis=-1),
                               np.delete(b, 3, axis=-1))
        assert not np.allclose(a[..., 3], b[..., 3])

    def test_grad_check(self):
        """
        Gradient check through the full block on a 4x4x8 input.
        """
        block = TransformerBlock(8, 2, 4, self.rng)
        randomize_parameters(block, self.rng)
        x = Tensor(self.rng.randn(4, 4, 8))
        func = weighted_loss(block, (4, 4, 8), self.rng)
        inputs = [x] + block.parameters()
        report = grad_check(lambda *args: func(args[0]), inputs,
                            n_samples=300, atol=1e-7)
        assert report.max_rel_error < 1e-4, report
