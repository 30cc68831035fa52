#!/usr/bin/env python
"""
Finite-difference gradient checks of the differentiable primitives, the
network building blocks and a small end-to-end model.

Every check weights the output with fixed random weights (magnitudes in
[0.5, 1.5], random signs) and compares reverse-mode gradients of the sum with
central differences in real64. Block and model checks cover every parameter,
biases and normalization affines included; gradients that are structurally
zero (a bias feeding a training-mode normalization, an attention key bias)
match within ATOL.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

import argparse
from collections import OrderedDict
import logging
import sys

import numpy as np

from hxseg.autograd import as_tensor, default_dtype, no_grad, Tensor
from hxseg.autograd import ops
from hxseg.autograd.gradcheck import grad_check
from hxseg.models.blocks import FusedMBConv, TransformerBlock
from hxseg.models.decoder import Decoder
from hxseg.models.fem import FEM
from hxseg.models.fifm import FIFM
from hxseg.models.network import build, ModelConfig
from hxseg.scripts import configure, global_parser, HelpFormatter

logger = logging.getLogger(__name__)

TOLERANCES = OrderedDict([('primitive', 1e-6), ('blocks', 1e-4),
                          ('model', 1e-3)])
ATOL = 1e-7


def add_arguments(parser):
    """
    Add gradcheck arguments to a parser.

    Parameters
    ----------
    parser : ArgumentParser
        Parser.
    """
    parser.add_argument('--scope', choices=list(TOLERANCES) + ['all'],
                        default='all',
                        help='Which suite to run.')


def parse_args(input_args=None):
    """
    Parse command-line arguments.

    Parameters
    ----------
    input_args : list, optional
        Input arguments. If not provided, defaults to sys.argv[1:].
    """
    parser = argparse.ArgumentParser(parents=[global_parser()],
                                     formatter_class=HelpFormatter)
    add_arguments(parser)
    return parser.parse_args(input_args)


def weighted_check(name, func, inputs, rng, n_samples=None):
    """
    Gradient check of a randomly weighted sum of func's output.

    Parameters
    ----------
    name : str
        Report name.
    func : callable
        Maps the inputs to a Tensor.
    inputs : list
        real64 Tensors to differentiate with respect to.
    rng : RandomState
        Generator for the output weights.
    n_samples : int, optional
        Number of sampled elements; every input is sampled at least once.
    """
    with no_grad():
        shape = as_tensor(func(*inputs)).shape
    weights = Tensor(rng.uniform(0.5, 1.5, size=shape) *
                     rng.choice([-1., 1.], size=shape))

    def loss(*args):
        return (as_tensor(func(*args)) * weights).sum()
    return grad_check(loss, inputs, name=name, n_samples=n_samples, atol=ATOL)


def randomize(module, rng, scale=0.5):
    """
    Replace every parameter and running mean with seeded normal values and
    every running variance with seeded values in [0.5, 2].
    """
    for param in module.parameters():
        param.data[...] = rng.normal(scale=scale, size=param.shape)
    for name, buf in module.named_buffers().items():
        if name.endswith('running_var'):
            buf.data[...] = rng.uniform(0.5, 2., size=buf.shape)
        else:
            buf.data[...] = rng.normal(scale=scale, size=buf.shape)


def primitive_checks(rng):
    """Checks of the individual ops."""
    def t(*shape):
        return Tensor(rng.randn(*shape))
    rows = np.array([0, 2, 2, 1])
    mean, var = rng.randn(4), rng.uniform(0.5, 2., size=4)
    checks = [
        ('matmul', lambda a, b: ops.matmul(a, b), [t(3, 4), t(4, 2)]),
        ('linear', lambda x, w, b: ops.linear(x, w, b),
         [t(2, 3, 4), t(4, 5), t(5)]),
        ('conv2d', lambda x, w, b: ops.conv2d(x, w, b),
         [t(5, 5, 2), t(3, 3, 2, 3), t(3)]),
        ('conv2d_stride2', lambda x, w, b: ops.conv2d(x, w, b, stride=2),
         [t(6, 6, 2), t(3, 3, 2, 3), t(3)]),
        ('depthwise_conv3x3', lambda x, w, b: ops.depthwise_conv3x3(x, w, b),
         [t(4, 4, 3), t(3, 3, 3), t(3)]),
        ('standardize', lambda x: ops.standardize(x, (0, 1)), [t(3, 3, 4)]),
        ('layer_norm', lambda x, g, b: ops.layer_norm(x, g, b),
         [t(2, 3, 4), t(4), t(4)]),
        ('channel_norm', lambda x, g, b: ops.channel_norm(x, g, b),
         [t(3, 3, 4), t(4), t(4)]),
        ('channel_affine',
         lambda x, g, b: ops.channel_affine(x, mean, var, g, b),
         [t(3, 3, 4), t(4), t(4)]),
        ('softmax', lambda x: ops.softmax(x), [t(3, 5)]),
        ('log_softmax', lambda x: ops.log_softmax(x), [t(3, 5)]),
        ('gelu', lambda x: ops.gelu(x), [t(4, 3)]),
        ('sigmoid', lambda x: ops.sigmoid(x), [t(4, 3)]),
        ('strip_pool_horizontal', lambda x: ops.strip_pool(x, 'horizontal'),
         [t(3, 4, 2)]),
        ('strip_pool_vertical', lambda x: ops.strip_pool(x, 'vertical'),
         [t(3, 4, 2)]),
        ('bilinear_upsample', lambda x: ops.bilinear_upsample(x, (5, 7)),
         [t(2, 3, 2)]),
        ('getitem', lambda x: ops.getitem(x, rows), [t(3, 4)]),
        ('div', lambda a, b: a / b,
         [t(3, 2), Tensor(rng.uniform(1., 2., size=(3, 2)))]),
    ]
    return [weighted_check(name, func, inputs, rng)
            for name, func, inputs in checks]


def block_checks(rng):
    """
    Checks of the encoder blocks, FEM, FIFM and the decoder over all of their
    parameters. The Fused-MBConv block is checked in both modes.
    """
    reports = []
    block = FusedMBConv(4, rng)
    randomize(block, rng)
    reports.append(weighted_check(
        'fused_mbconv', lambda x, *p: block(x),
        [Tensor(rng.randn(4, 4, 4))] + block.parameters(), rng,
        n_samples=300))
    block.train()
    reports.append(weighted_check(
        'fused_mbconv_training', lambda x, *p: block(x),
        [Tensor(rng.randn(4, 4, 4))] + block.parameters(), rng,
        n_samples=300))
    block.eval()
    transformer = TransformerBlock(8, 2, 4, rng)
    randomize(transformer, rng)
    reports.append(weighted_check(
        'transformer_block', lambda x, *p: transformer(x),
        [Tensor(rng.randn(4, 4, 8))] + transformer.parameters(), rng,
        n_samples=300))
    fem = FEM(4, 2, rng)
    randomize(fem, rng)
    reports.append(weighted_check(
        'fem', lambda a, b, *p: ops.concat(list(fem(a, b)), axis=-1),
        [Tensor(rng.randn(3, 3, 4)), Tensor(rng.randn(3, 3, 4))] +
        fem.parameters(), rng, n_samples=300))
    fifm = FIFM(4, 2, 4, rng)
    randomize(fifm, rng)
    reports.append(weighted_check(
        'fifm', lambda a, b, *p: fifm(a, b),
        [Tensor(rng.randn(4, 4, 4)), Tensor(rng.randn(4, 4, 4))] +
        fifm.parameters(), rng, n_samples=300))
    decoder = Decoder([2, 3, 3, 3], 3, rng, width=4)
    randomize(decoder, rng)
    stages = [Tensor(rng.randn(4, 4, 2))]
    stages += [Tensor(rng.randn(2, 2, 3)) for _ in range(3)]
    reports.append(weighted_check(
        'decoder', lambda *args: decoder(list(args[:4]), (4, 4)),
        stages + decoder.parameters(), rng, n_samples=300))
    return reports


def model_checks(rng):
    """
    End-to-end check of the 16x16 toy model; every parameter tensor is
    sampled at least once.
    """
    model = build(ModelConfig.toy())
    for param in model.parameters():
        param.data += rng.normal(scale=0.05, size=param.shape)
    config = model.config
    hsi = Tensor(rng.rand(16, 16, config.hsi_bands))
    x = Tensor(rng.rand(16, 16, config.x_bands))
    params = model.parameters()
    return [weighted_check('toy_model', lambda a, b, *p: model(a, b),
                           [hsi, x] + params, rng,
                           n_samples=max(60, 2 * len(params)))]

SUITES = {'primitive': primitive_checks,
          'blocks': block_checks,
          'model': model_checks}


def main(scope='all', seed=0):
    """
    Run gradient-check suites. Returns (passed, reports) where reports pairs
    every GradCheckReport with its tolerance.

    Parameters
    ----------
    scope : str, optional (default 'all')
        'primitive', 'blocks', 'model' or 'all'.
    seed : int, optional (default 0)
        Seed for inputs, parameters and output weights.
    """
    scopes = list(TOLERANCES) if scope == 'all' else [scope]
    results = []
    with default_dtype('f64'):
        for name in scopes:
            rng = np.random.RandomState(seed)
            for report in SUITES[name](rng):
                results.append((report, TOLERANCES[name]))
    passed = True
    for report, tolerance in results:
        ok = report.passed(tolerance)
        passed = passed and ok
        sys.stdout.write('{:<24} {:.3e} (tol {:.0e}) {}\n'.format(
            report.name, report.max_rel_error, tolerance,
            'ok' if ok else 'FAILED'))
    worst = max(results, key=lambda r: r[0].max_rel_error / r[1])[0]
    sys.stdout.write('worst: {!r}\n'.format(worst))
    return passed, results

if __name__ == '__main__':
    args = parse_args()
    configure(args.precision, args.quiet)
    passed, _ = main(args.scope, args.seed or 0)
    sys.exit(0 if passed else 2)
