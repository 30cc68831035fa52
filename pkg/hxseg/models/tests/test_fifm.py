"""
Tests for the feature interaction and fusion module.
"""
import math
import numpy as np
import numpy.testing as npt
import unittest

from hxseg import ConfigError, DivisibilityError
from hxseg.autograd import Tensor
from hxseg.autograd.gradcheck import grad_check
from ..fifm import (ConcatFusion, departition, FIFM, gather_kv,
                    partition_regions, region_adjacency, region_attention,
                    route_regions)
from .test_blocks import randomize_parameters


def softmax_rows(scores):
    scores = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(scores)
    return e / e.sum(axis=-1, keepdims=True)


def project(layer, x):
    """Apply a Linear layer with numpy."""
    return x.dot(layer.weight.numpy()) + layer.bias.numpy()


class TestRegions(unittest.TestCase):
    """
    Tests for partitioning, routing and gathering.
    """
    def setUp(self):
        """
        Set up tests.
        """
        self.rng = np.random.RandomState(5)

    def test_partition_enumeration(self):
        """
        4x4 map of 0..15 with s = 2.
        """
        f = np.arange(16.).reshape(4, 4, 1)
        regions = partition_regions(f, 2).numpy()[..., 0]
        npt.assert_array_equal(regions, [[0, 1, 4, 5], [2, 3, 6, 7],
                                         [8, 9, 12, 13], [10, 11, 14, 15]])

    def test_single_region(self):
        """
        s = 1 gives one region of all tokens in row-major order.
        """
        f = self.rng.randn(3, 5, 2)
        regions = partition_regions(f, 1).numpy()
        npt.assert_array_equal(regions, f.reshape(1, 15, 2))

    def test_round_trip(self):
        """
        departition inverts partition_regions exactly.
        """
        f = self.rng.randn(6, 4, 3)
        regions = partition_regions(f, 2)
        assert regions.shape == (4, 6, 3)
        npt.assert_array_equal(departition(regions, 2, 6, 4).numpy(), f)

    def test_not_divisible(self):
        """
        Grids that do not divide the map are rejected.
        """
        with self.assertRaises(DivisibilityError):
            partition_regions(np.ones((5, 4, 1)), 2)

    def test_route_full(self):
        """
        k = s^2 gives a permutation of all regions in every row.
        """
        q, k = self.rng.randn(9, 4, 3), self.rng.randn(9, 4, 3)
        idx = route_regions(q, k, 9)
        assert idx.shape == (9, 9)
        for row in idx:
            npt.assert_array_equal(np.sort(row), np.arange(9))

    def test_route_hand(self):
        """
        Orthogonal region means route each region to itself.
        """
        q = np.array([[[1., 0.]], [[0., 1.]]])
        npt.assert_array_equal(route_regions(q, q.copy(), 1), [[0], [1]])

    def test_adjacency(self):
        """
        Adjacency is s^2 x s^2 and uses region means.
        """
        q, k = self.rng.randn(4, 3, 2), self.rng.randn(4, 3, 2)
        adjacency = region_adjacency(q, k)
        assert adjacency.shape == (4, 4)
        npt.assert_allclose(adjacency, q.mean(axis=1).dot(k.mean(axis=1).T))

    def test_routing_scale_invariance(self):
        """
        Scaling tokens by lambda scales A by lambda^2 and keeps the routing.
        """
        q, k = self.rng.randn(4, 3, 2), self.rng.randn(4, 3, 2)
        adjacency = region_adjacency(q, k)
        npt.assert_allclose(region_adjacency(3. * q, 3. * k), 9. * adjacency)
        npt.assert_array_equal(route_regions(3. * q, 3. * k, 2),
                               route_regions(q, k, 2))

    def test_gather_copy_loop(self):
        """
        Gathered tokens follow the index order of each row.
        """
        k = Tensor(self.rng.randn(4, 2, 3))
        v = Tensor(self.rng.randn(4, 2, 3))
        idx = np.array([[2, 1], [0, 3], [3, 3], [1, 0]])
        k_g, v_g = gather_kv(k, v, idx)
        assert k_g.shape == v_g.shape == (4, 4, 3)
        for i in range(4):
            expected_k = np.concatenate([k.numpy()[j] for j in idx[i]])
            expected_v = np.concatenate([v.numpy()[j] for j in idx[i]])
            npt.assert_array_equal(k_g.numpy()[i], expected_k)
            npt.assert_array_equal(v_g.numpy()[i], expected_v)

    def test_gather_full(self):
        """
        k = s^2 with identity rows gathers every token.
        """
        k = Tensor(self.rng.randn(4, 2, 3))
        idx = np.tile(np.arange(4), (4, 1))
        k_g, _ = gather_kv(k, k, idx)
        for i in range(4):
            npt.assert_array_equal(k_g.numpy()[i], k.numpy().reshape(8, 3))

    def test_gather_out_of_range(self):
        """
        Indices outside [0, s^2) are rejected.
        """
        k = Tensor(np.ones((4, 2, 3)))
        with self.assertRaises(IndexError):
            gather_kv(k, k, np.array([[4], [0], [1], [2]]))

    def test_attention_rows(self):
        """
        Attention rows sum to one: constant values pass through unchanged.
        """
        q, k = Tensor(self.rng.randn(4, 3, 5)), Tensor(self.rng.randn(4, 6, 5))
        out = region_attention(q, k, Tensor(np.ones((4, 6, 5))))
        npt.assert_allclose(out.numpy(), 1., atol=1e-6)


class TestFIFM(unittest.TestCase):
    """
    Tests for FIFM.
    """
    def setUp(self):
        """
        Set up tests.
        """
        self.rng = np.random.RandomState(6)

    def dense_oracle(self, fifm, f_hsi, f_x):
        """Every token of each modality attends over all tokens, swapped V."""
        h, w, c = f_hsi.shape
        a, b = f_hsi.reshape(h * w, c), f_x.reshape(h * w, c)
        q_a, k_a, v_a = [project(getattr(fifm, '{}_hsi'.format(kind)), a)
                         for kind in 'qkv']
        q_b, k_b, v_b = [project(getattr(fifm, '{}_x'.format(kind)), b)
                         for kind in 'qkv']
        o_a = softmax_rows(q_a.dot(k_a.T) / math.sqrt(c)).dot(v_b)
        o_b = softmax_rows(q_b.dot(k_b.T) / math.sqrt(c)).dot(v_a)
        return o_a.reshape(h, w, c), o_b.reshape(h, w, c)

    def test_full_routing_oracle(self):
        """
        k = s^2 equals dense cross-modal attention.
        """
        shapes = [(8, 8, 8), (4, 4, 4), (6, 8, 2), (2, 4, 8), (4, 6, 3)]
        for seed in range(20):
            rng = np.random.RandomState(seed)
            h, w, c = shapes[seed % len(shapes)]
            s = 1 + seed % 2
            fifm = FIFM(c, s, s * s, rng)
            randomize_parameters(fifm, rng)
            f_hsi, f_x = rng.randn(h, w, c), rng.randn(h, w, c)
            o_hsi, o_x = fifm.interact(Tensor(f_hsi), Tensor(f_x))
            expected_hsi, expected_x = self.dense_oracle(fifm, f_hsi, f_x)
            npt.assert_allclose(o_hsi.numpy(), expected_hsi, atol=1e-5)
            npt.assert_allclose(o_x.numpy(), expected_x, atol=1e-5)
            fused = fifm.fusion(Tensor(np.concatenate(
                [expected_hsi, expected_x], axis=-1)))
            npt.assert_allclose(fifm(Tensor(f_hsi), Tensor(f_x)).numpy(),
                                fused.numpy(), atol=1e-5)

    def test_symmetry(self):
        """
        Identical inputs and parameters give identical outputs.
        """
        fifm = FIFM(4, 2, 2, self.rng)
        randomize_parameters(fifm, self.rng)
        for kind in 'qkv':
            source = getattr(fifm, '{}_x'.format(kind))
            target = getattr(fifm, '{}_hsi'.format(kind))
            target.weight.data[...] = source.weight.data
            target.bias.data[...] = source.bias.data
        f = Tensor(self.rng.randn(4, 4, 4))
        o_hsi, o_x = fifm.interact(f, f)
        npt.assert_array_equal(o_hsi.numpy(), o_x.numpy())

    def test_loop_oracle(self):
        """
        4x4x2 inputs, s = 2, k = 1, against an explicit loop evaluation.
        """
        fifm = FIFM(2, 2, 1, self.rng)
        randomize_parameters(fifm, self.rng)
        f_hsi, f_x = self.rng.randn(4, 4, 2), self.rng.randn(4, 4, 2)
        feats = {'hsi': f_hsi, 'x': f_x}
        proj = {}
        for modality, f in feats.items():
            for kind in 'qkv':
                layer = getattr(fifm, '{}_{}'.format(kind, modality))
                proj[kind, modality] = project(layer, f)  # 4 x 4 x 2

        def region_tokens(a, r):
            gi, gj = divmod(r, 2)
            return [a[2 * gi + i, 2 * gj + j] for i in range(2)
                    for j in range(2)]

        outputs = {}
        for modality, other in [('hsi', 'x'), ('x', 'hsi')]:
            q, k = proj['q', modality], proj['k', modality]
            v = proj['v', other]
            q_r = [np.mean(region_tokens(q, r), axis=0) for r in range(4)]
            k_r = [np.mean(region_tokens(k, r), axis=0) for r in range(4)]
            out = np.zeros((4, 4, 2))
            for r in range(4):
                scores = [q_r[r].dot(k_r[t]) for t in range(4)]
                best = 0
                for t in range(1, 4):
                    if scores[t] > scores[best]:
                        best = t
                keys = region_tokens(k, best)
                values = region_tokens(v, best)
                gi, gj = divmod(r, 2)
                for i in range(2):
                    for j in range(2):
                        query = q[2 * gi + i, 2 * gj + j]
                        logits = np.array([query.dot(key) for key in keys])
                        weights = softmax_rows(logits / math.sqrt(2.))
                        out[2 * gi + i, 2 * gj + j] = sum(
                            wt * val for wt, val in zip(weights, values))
            outputs[modality] = out
        o_hsi, o_x = fifm.interact(Tensor(f_hsi), Tensor(f_x))
        npt.assert_allclose(o_hsi.numpy(), outputs['hsi'], atol=1e-10)
        npt.assert_allclose(o_x.numpy(), outputs['x'], atol=1e-10)

    def test_output_width(self):
        """
        The fused output keeps the spatial shape and has c_out channels.
        """
        fifm = FIFM(4, 2, 2, self.rng, c_out=6)
        out = fifm(Tensor(self.rng.randn(4, 6, 4)),
                   Tensor(self.rng.randn(4, 6, 4)))
        assert out.shape == (4, 6, 6)
        assert FIFM(4, 2, 2, self.rng).c_out == 4

    def test_invalid(self):
        """
        Bad top-k values and non-divisible maps are rejected.
        """
        with self.assertRaises(ConfigError):
            FIFM(4, 2, 5, self.rng)
        fifm = FIFM(4, 2, 2, self.rng)
        with self.assertRaises(DivisibilityError):
            fifm(Tensor(np.ones((3, 4, 4))), Tensor(np.ones((3, 4, 4))))

    def test_concat_fusion(self):
        """
        The ablation fusion is a linear map of the concatenated branches.
        """
        fusion = ConcatFusion(3, self.rng)
        a, b = self.rng.randn(2, 2, 3), self.rng.randn(2, 2, 3)
        expected = project(fusion.linear, np.concatenate([a, b], axis=-1))
        npt.assert_allclose(fusion(Tensor(a), Tensor(b)).numpy(), expected,
                            atol=1e-12)

    def test_grad_check(self):
        """
        Gradient check through FIFM on 4x4x4 inputs, s = 2, k = 2.
        """
        fifm = FIFM(4, 2, 2, self.rng)
        randomize_parameters(fifm, self.rng)
        f_hsi = Tensor(self.rng.randn(4, 4, 4))
        f_x = Tensor(self.rng.randn(4, 4, 4))
        weights = Tensor(self.rng.uniform(0.5, 1.5, size=(4, 4, 4)) *
                         self.rng.choice([-1., 1.], size=(4, 4, 4)))
        # key biases shift every score of a query equally: zero gradient
        params = fifm.parameters()

        def loss(a, b, *args):
            return (fifm(a, b) * weights).sum()
        report = grad_check(loss, [f_hsi, f_x] + params, n_samples=300,
                            atol=1e-7)
        assert report.max_rel_error < 1e-4, report
