"""
Parameter and FLOP counting.

FLOPs are reported as twice the multiply-accumulates of one forward pass.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

import numpy as np

from hxseg.autograd import count_macs, no_grad


def profile_macs(model, *input_shapes):
    """
    Multiply-accumulates per op label of one forward pass on zero inputs.

    Parameters
    ----------
    model : Module
        Model.
    input_shapes : tuple
        Shape of every forward argument.
    """
    inputs = [np.zeros(shape) for shape in input_shapes]
    with no_grad(), count_macs() as counter:
        model(*inputs)
    return counter


def count_params_flops(model, *input_shapes):
    """
    Exact parameter count and forward FLOPs.

    Parameters
    ----------
    model : Module
        Model.
    input_shapes : tuple
        Shape of every forward argument, e.g. (H, W, hsi_bands) and
        (H, W, x_bands) for the segmentation network.
    """
    counter = profile_macs(model, *input_shapes)
    return model.num_parameters(), 2 * counter.total()
