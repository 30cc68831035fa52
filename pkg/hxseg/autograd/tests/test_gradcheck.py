"""
Tests for grad_check and the gradients of every primitive.
"""
import numpy as np
import unittest

from hxseg import ShapeError
from .. import default_dtype, Tensor
from .. import ops
from ..gradcheck import grad_check


class TestGradCheck(unittest.TestCase):
    """
    Tests for grad_check.
    """
    def setUp(self):
        """
        Set up tests.
        """
        self.rng = np.random.RandomState(123)

    def tensor(self, *shape):
        return Tensor(self.rng.randn(*shape), requires_grad=True)

    def weights(self, *shape):
        return Tensor(self.rng.uniform(-1, 1, size=shape))

    def output_weights(self, shape):
        """Random signs with magnitudes in [0.5, 1.5]."""
        signs = self.rng.choice([-1., 1.], size=shape)
        return Tensor(signs * self.rng.uniform(0.5, 1.5, size=shape))

    def test_linear_sum(self):
        """
        sum(linear(x)) with fixed weights.
        """
        x = self.tensor(3, 4)
        weight, bias = self.weights(4, 2), self.weights(2)
        report = grad_check(lambda t: ops.linear(t, weight, bias).sum(), [x])
        assert report.max_rel_error < 1e-7, report
        assert report.element_count == 12

    def test_softmax_sum(self):
        """
        sum(softmax(x)) is constant so both gradients vanish.
        """
        # the loss is constant, so any step size is exact
        x = self.tensor(3, 2)
        report = grad_check(lambda t: ops.softmax(t).sum(), [x], eps=0.5)
        assert report.max_rel_error < 1e-7, report

    def test_non_scalar(self):
        """
        Non-scalar losses are rejected.
        """
        with self.assertRaises(ShapeError):
            grad_check(lambda t: t * 2., [self.tensor(2, 2)])

    def test_real32_rejected(self):
        """
        Only real64 inputs are accepted.
        """
        with default_dtype('f32'):
            x = Tensor(np.ones(3), requires_grad=True)
        with self.assertRaises(ValueError):
            grad_check(lambda t: t.sum(), [x])

    def test_sampling(self):
        """
        n_samples limits the number of compared elements.
        """
        x = self.tensor(6, 6)
        report = grad_check(lambda t: (t * t).sum(), [x], n_samples=5)
        assert report.element_count == 5
        assert report.max_rel_error < 1e-6

    def test_sampling_covers_every_input(self):
        """
        Sampling compares at least one element of every input, so a wrong
        gradient on a one-element input is found among 3 of 101 elements.
        """
        a, b = self.tensor(10, 10), self.tensor(1)

        def func(x, y):
            # y enters the loss but reports a zero gradient
            wrong = Tensor.from_op(y.data * 3., (y,), lambda g: (g * 0.,))
            return (x * x).sum() + wrong.sum()
        for seed in range(5):
            report = grad_check(func, [a, b], n_samples=3, seed=seed)
            assert report.element_count == 3
            assert report.worst[0] == 1
            assert report.max_rel_error > 0.5, report
        report = grad_check(func, [a, b], n_samples=1)
        assert report.element_count == 2

    def test_absolute_floor(self):
        """
        atol accepts structurally zero gradients that central differences
        only resolve to rounding noise.
        """
        x, y = self.tensor(3), self.tensor(2)

        def func(a, b):
            # b moves the loss by 1e-10 per unit but reports a zero gradient
            noise = Tensor.from_op(b.data * 1e-10, (b,), lambda g: (g * 0.,))
            return (a * a).sum() + noise.sum()
        report = grad_check(func, [x, y])
        assert report.max_rel_error > 1e-3, report
        report = grad_check(func, [x, y], atol=1e-8)
        assert report.max_rel_error < 1e-7, report

    def check(self, func, inputs, tolerance=1e-6):
        """
        Run grad_check on a weighted-sum loss of func.
        """
        weights = self.output_weights(func(*inputs).shape)
        report = grad_check(lambda *args: (func(*args) * weights).sum(),
                            inputs)
        assert report.max_rel_error < tolerance, report

    def test_primitives(self):
        """
        Every primitive passes at 1e-6.
        """
        self.check(lambda a, b: a * b - a / (b * b + 2.),
                   [self.tensor(3, 4), self.tensor(4)])
        self.check(lambda a: ops.exp(a) + ops.log(a * a + 1.),
                   [self.tensor(2, 3)])
        self.check(ops.sigmoid, [self.tensor(4, 3)])
        self.check(ops.gelu, [self.tensor(4, 3)])
        self.check(lambda a: ops.softmax(a, axis=0), [self.tensor(4, 3)])
        self.check(lambda a: ops.log_softmax(a, axis=-1), [self.tensor(4, 3)])
        self.check(lambda a: ops.standardize(a, (0, 1)), [self.tensor(3, 4, 2)])
        mean, var = self.rng.randn(2), self.rng.uniform(0.5, 2., size=2)
        self.check(lambda a, g, b: ops.channel_affine(a, mean, var, g, b),
                   [self.tensor(3, 4, 2), self.tensor(2), self.tensor(2)])
        self.check(lambda a, b: ops.matmul(a, b),
                   [self.tensor(2, 3, 4), self.tensor(4, 5)])
        self.check(ops.linear, [self.tensor(2, 3, 4), self.tensor(4, 2),
                                self.tensor(2)])
        self.check(lambda x, w, b: ops.conv2d(x, w, b),
                   [self.tensor(5, 4, 3), self.tensor(3, 3, 3, 2),
                    self.tensor(2)])
        self.check(lambda x, w, b: ops.conv2d(x, w, b, stride=2),
                   [self.tensor(5, 4, 3), self.tensor(3, 3, 3, 2),
                    self.tensor(2)])
        self.check(ops.depthwise_conv3x3,
                   [self.tensor(4, 5, 3), self.tensor(3, 3, 3),
                    self.tensor(3)])
        self.check(lambda a: ops.strip_pool(a, 'horizontal'),
                   [self.tensor(3, 4, 2)])
        self.check(lambda a: ops.strip_pool(a, 'vertical'),
                   [self.tensor(3, 4, 2)])
        self.check(lambda a: ops.bilinear_upsample(a, (7, 6)),
                   [self.tensor(3, 2, 2)])
        self.check(lambda a: ops.concat([a, a * 2.], axis=1)[1:, ::2],
                   [self.tensor(3, 4)])
        self.check(lambda a: a[np.array([[2, 0], [1, 1]])].reshape(4, 3)
                   .transpose(1, 0), [self.tensor(3, 3)])
