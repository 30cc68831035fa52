"""
Differentiable tensor ops.

Feature maps are channels-last: h x w x c.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

import builtins
import math

import numpy as np
from scipy import special

from hxseg import ShapeError
from hxseg.autograd import Tensor, as_tensor, record_macs, unbroadcast

_SQRT2 = math.sqrt(2.)
_INV_SQRT_2PI = 1. / math.sqrt(2. * math.pi)


def _normalize_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


# elementwise arithmetic

def add(a, b):
    """Elementwise sum with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)
    return Tensor.from_op(a.data + b.data, (a, b), backward)


def sub(a, b):
    """Elementwise difference with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)
    return Tensor.from_op(a.data - b.data, (a, b), backward)


def mul(a, b):
    """Elementwise product with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        return (unbroadcast(g * b.data, a.shape),
                unbroadcast(g * a.data, b.shape))
    return Tensor.from_op(a.data * b.data, (a, b), backward)


def div(a, b):
    """Elementwise quotient with broadcasting."""
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        return (unbroadcast(g / b.data, a.shape),
                unbroadcast(-g * a.data / (b.data * b.data), b.shape))
    return Tensor.from_op(a.data / b.data, (a, b), backward)


def neg(a):
    """Elementwise negation."""
    a = as_tensor(a)
    return Tensor.from_op(-a.data, (a,), lambda g: (-g,))


def exp(a):
    """Elementwise exponential."""
    a = as_tensor(a)
    out = np.exp(a.data)
    return Tensor.from_op(out, (a,), lambda g: (g * out,))


def log(a):
    """Elementwise natural logarithm."""
    a = as_tensor(a)
    return Tensor.from_op(np.log(a.data), (a,), lambda g: (g / a.data,))


def sigmoid(a):
    """Logistic sigmoid."""
    a = as_tensor(a)
    out = special.expit(a.data)
    return Tensor.from_op(out, (a,), lambda g: (g * out * (1. - out),))


def gelu(a):
    """
    Exact (erf-based) Gaussian error linear unit.
    """
    a = as_tensor(a)
    x = a.data
    cdf = 0.5 * (1. + special.erf(x / _SQRT2))

    def backward(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
        return (g * (cdf + x * pdf),)
    return Tensor.from_op(x * cdf, (a,), backward)


# reductions and shape ops

def sum(a, axis=None, keepdims=False):
    """Sum over axes."""
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    out = np.sum(a.data, axis=axes, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).copy(),)
    return Tensor.from_op(np.asarray(out), (a,), backward)


def mean(a, axis=None, keepdims=False):
    """Mean over axes."""
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    n = 1
    for ax in axes:
        n *= a.shape[ax]
    out = np.mean(a.data, axis=axes, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / n, a.shape).copy(),)
    return Tensor.from_op(np.asarray(out), (a,), backward)


def reshape(a, shape):
    """Row-major reshape."""
    a = as_tensor(a)
    out = a.data.reshape(shape)
    return Tensor.from_op(out, (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes):
    """Permute axes."""
    a = as_tensor(a)
    inverse = np.argsort(axes)
    return Tensor.from_op(a.data.transpose(axes), (a,),
                          lambda g: (g.transpose(inverse),))


def concat(tensors, axis=-1):
    """
    Concatenate tensors along an axis.

    Parameters
    ----------
    tensors : sequence of Tensor
        Tensors with matching shapes except along axis.
    axis : int, optional (default -1)
        Concatenation axis.
    """
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        if (len(t.shape) != len(ref) or
                t.shape[:ax] + t.shape[ax + 1:] != ref[:ax] + ref[ax + 1:]):
            raise ShapeError('Cannot concatenate shapes {} and {} on axis '
                             '{}.'.format(ref, t.shape, axis))
    sizes = [t.shape[ax] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.data for t in tensors], axis=ax)

    def backward(g):
        return tuple(np.split(g, bounds, axis=ax))
    return Tensor.from_op(out, tensors, backward)


def getitem(a, key):
    """
    Basic or integer-array indexing; gradients scatter back with np.add.at.
    """
    a = as_tensor(a)
    if isinstance(key, Tensor):
        key = key.data.astype(int)
    out = a.data[key]

    def backward(g):
        grad = np.zeros_like(a.data)
        np.add.at(grad, key, g)
        return (grad,)
    return Tensor.from_op(np.array(out), (a,), backward)


# linear algebra

def matmul(a, b, label='matmul'):
    """
    Batched matrix product over the last two axes.

    Parameters
    ----------
    a, b : Tensor
        Operands with at least two dims; leading dims broadcast.
    label : str, optional (default 'matmul')
        Label under which multiply-accumulates are counted.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError('matmul shapes {} and {} are incompatible.'.format(
            a.shape, b.shape))
    out = np.matmul(a.data, b.data)
    record_macs(label, out.size * a.shape[-1])

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)
    return Tensor.from_op(out, (a, b), backward)


def linear(x, weight, bias=None):
    """
    Affine map over the trailing dim, broadcast over leading dims.

    Parameters
    ----------
    x : Tensor
        Input of shape (..., c_in).
    weight : Tensor
        Weight of shape (c_in, c_out).
    bias : Tensor, optional
        Bias of shape (c_out,).
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[0]:
        raise ShapeError('linear weight {} does not match input {}.'.format(
            weight.shape, x.shape))
    c_in, c_out = weight.shape
    flat = x.data.reshape(-1, c_in)
    out = flat @ weight.data
    record_macs('linear', flat.shape[0] * c_in * c_out)
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (c_out,):
            raise ShapeError('linear bias {} does not match weight {}.'.format(
                bias.shape, weight.shape))
        out = out + bias.data
        parents.append(bias)
    out = out.reshape(x.shape[:-1] + (c_out,))

    def backward(g):
        g2 = g.reshape(-1, c_out)
        grads = [(g2 @ weight.data.T).reshape(x.shape), flat.T @ g2]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return tuple(grads)
    return Tensor.from_op(out, parents, backward)


# normalization and attention helpers

def softmax(a, axis=-1):
    """
    Max-subtracted softmax along an axis.
    """
    a = as_tensor(a)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)
    return Tensor.from_op(out, (a,), backward)


def log_softmax(a, axis=-1):
    """
    Numerically stable log-softmax along an axis.
    """
    a = as_tensor(a)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    out = shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))

    def backward(g):
        return (g - np.exp(out) * np.sum(g, axis=axis, keepdims=True),)
    return Tensor.from_op(out, (a,), backward)


def standardize(a, axes, eps=1e-5):
    """
    Zero-mean, unit-variance rescaling over the given axes (no affine).

    Parameters
    ----------
    a : Tensor
        Input.
    axes : int or tuple
        Axes holding the statistics.
    eps : float, optional (default 1e-5)
        Variance floor.
    """
    a = as_tensor(a)
    axes = _normalize_axes(axes, a.ndim)
    centered = a.data - np.mean(a.data, axis=axes, keepdims=True)
    var = np.mean(centered * centered, axis=axes, keepdims=True)
    inv = 1. / np.sqrt(var + eps)
    out = centered * inv

    def backward(g):
        g_mean = np.mean(g, axis=axes, keepdims=True)
        gy_mean = np.mean(g * out, axis=axes, keepdims=True)
        return (inv * (g - g_mean - out * gy_mean),)
    return Tensor.from_op(out, (a,), backward)


def layer_norm(x, gamma, beta, eps=1e-5):
    """Layer normalization over the trailing (channel) dim."""
    return standardize(x, -1, eps) * gamma + beta


def channel_norm(x, gamma, beta, eps=1e-5):
    """
    Per-channel normalization with statistics over the spatial positions of
    an h x w x c map (training-mode batch normalization).
    """
    return standardize(x, (0, 1), eps) * gamma + beta


def channel_affine(x, mean, var, gamma, beta, eps=1e-5):
    """
    Per-channel normalization with fixed statistics (inference-mode batch
    normalization).

    Parameters
    ----------
    x : Tensor
        Map h x w x c.
    mean, var : ndarray
        Per-channel statistics; treated as constants.
    gamma, beta : Tensor
        Per-channel affine.
    eps : float, optional (default 1e-5)
        Variance floor.
    """
    scale = 1. / np.sqrt(np.asarray(var) + eps)
    return (as_tensor(x) - np.asarray(mean)) * scale * gamma + beta


# spatial ops

def _check_map(x, op):
    if x.ndim != 3:
        raise ShapeError('{} expects an h x w x c map, got shape {}.'.format(
            op, x.shape))


def _same_padding(size, k, stride):
    out = -(-size // stride)
    total = builtins.max((out - 1) * stride + k - size, 0)
    return out, total // 2, total - total // 2


def conv2d(x, weight, bias=None, stride=1, padding='same'):
    """
    2D convolution of an h x w x c_in map.

    Parameters
    ----------
    x : Tensor
        Input map h x w x c_in.
    weight : Tensor
        Kernel k x k x c_in x c_out, k odd.
    bias : Tensor, optional
        Bias of shape (c_out,).
    stride : int, optional (default 1)
        1 or 2.
    padding : str, optional (default 'same')
        'same' (output ceil(h / stride)) or 'valid'.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    _check_map(x, 'conv2d')
    if weight.ndim != 4 or weight.shape[0] != weight.shape[1]:
        raise ShapeError('conv2d weight must be k x k x c_in x c_out, got '
                         '{}.'.format(weight.shape))
    k, _, c_in, c_out = weight.shape
    if k % 2 != 1:
        raise ValueError('conv2d kernel size must be odd, got {}.'.format(k))
    if c_in != x.shape[2]:
        raise ShapeError('conv2d weight {} does not match input {}.'.format(
            weight.shape, x.shape))
    if stride not in (1, 2):
        raise ValueError('conv2d stride must be 1 or 2, got {}.'.format(
            stride))
    h, w = x.shape[:2]
    if padding == 'same':
        oh, top, bottom = _same_padding(h, k, stride)
        ow, left, right = _same_padding(w, k, stride)
    elif padding == 'valid':
        if h < k or w < k:
            raise ShapeError('conv2d valid padding needs input >= kernel, '
                             'got {} and {}.'.format(x.shape, weight.shape))
        oh, ow = (h - k) // stride + 1, (w - k) // stride + 1
        top = bottom = left = right = 0
    else:
        raise ValueError("Unrecognized padding '{}'.".format(padding))
    xp = np.pad(x.data, ((top, bottom), (left, right), (0, 0)))
    span_h, span_w = stride * (oh - 1) + 1, stride * (ow - 1) + 1
    out = np.zeros((oh, ow, c_out), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            patch = xp[i:i + span_h:stride, j:j + span_w:stride]
            out += patch @ weight.data[i, j]
    record_macs('conv2d', oh * ow * k * k * c_in * c_out)
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (c_out,):
            raise ShapeError('conv2d bias {} does not match weight '
                             '{}.'.format(bias.shape, weight.shape))
        out += bias.data
        parents.append(bias)

    def backward(g):
        gxp = np.zeros_like(xp)
        gw = np.zeros_like(weight.data)
        g2 = g.reshape(-1, c_out)
        for i in range(k):
            for j in range(k):
                patch = xp[i:i + span_h:stride, j:j + span_w:stride]
                gw[i, j] = patch.reshape(-1, c_in).T @ g2
                gxp[i:i + span_h:stride, j:j + span_w:stride] += (
                    g @ weight.data[i, j].T)
        grads = [gxp[top:top + h, left:left + w], gw]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return tuple(grads)
    return Tensor.from_op(out, parents, backward)


def depthwise_conv3x3(x, weight, bias=None):
    """
    Per-channel 3 x 3 convolution, same padding, stride 1.

    Parameters
    ----------
    x : Tensor
        Input map h x w x c.
    weight : Tensor
        Kernel 3 x 3 x c.
    bias : Tensor, optional
        Bias of shape (c,).
    """
    x, weight = as_tensor(x), as_tensor(weight)
    _check_map(x, 'depthwise_conv3x3')
    if weight.shape != (3, 3, x.shape[2]):
        raise ShapeError('depthwise weight {} does not match input '
                         '{}.'.format(weight.shape, x.shape))
    h, w, c = x.shape
    xp = np.pad(x.data, ((1, 1), (1, 1), (0, 0)))
    out = np.zeros_like(x.data)
    for i in range(3):
        for j in range(3):
            out += xp[i:i + h, j:j + w] * weight.data[i, j]
    record_macs('depthwise_conv', h * w * 9 * c)
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (c,):
            raise ShapeError('depthwise bias {} does not match input '
                             '{}.'.format(bias.shape, x.shape))
        out += bias.data
        parents.append(bias)

    def backward(g):
        gxp = np.zeros_like(xp)
        gw = np.zeros_like(weight.data)
        for i in range(3):
            for j in range(3):
                gw[i, j] = np.sum(xp[i:i + h, j:j + w] * g, axis=(0, 1))
                gxp[i:i + h, j:j + w] += g * weight.data[i, j]
        grads = [gxp[1:1 + h, 1:1 + w], gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 1)))
        return tuple(grads)
    return Tensor.from_op(out, parents, backward)


def strip_pool(x, direction):
    """
    Mean pooling along one spatial axis.

    Parameters
    ----------
    x : Tensor
        Input map h x w x c.
    direction : str
        'horizontal' (mean over columns, h x 1 x c) or 'vertical' (mean over
        rows, 1 x w x c).
    """
    x = as_tensor(x)
    _check_map(x, 'strip_pool')
    if direction == 'horizontal':
        return mean(x, axis=1, keepdims=True)
    elif direction == 'vertical':
        return mean(x, axis=0, keepdims=True)
    raise ValueError("Unrecognized direction '{}'.".format(direction))


def interpolation_matrix(n_in, n_out, dtype=np.float64):
    """
    Linear interpolation weights (align_corners=False) from n_in to n_out
    samples, as an n_out x n_in matrix with rows summing to 1.
    """
    matrix = np.zeros((n_out, n_in), dtype=dtype)
    scale = n_in / float(n_out)
    for i in range(n_out):
        src = builtins.max((i + 0.5) * scale - 0.5, 0.)
        i0 = builtins.min(int(math.floor(src)), n_in - 1)
        i1 = builtins.min(i0 + 1, n_in - 1)
        lam = src - i0
        matrix[i, i0] += 1. - lam
        matrix[i, i1] += lam
    return matrix


def bilinear_upsample(x, target):
    """
    Bilinear upsampling of an h x w x c map to target (H, W).

    Parameters
    ----------
    x : Tensor
        Input map.
    target : tuple
        Output size (H, W) with H >= h and W >= w.
    """
    x = as_tensor(x)
    _check_map(x, 'bilinear_upsample')
    h, w, _ = x.shape
    big_h, big_w = target
    if big_h < h or big_w < w:
        raise ShapeError('Upsampling target {} is smaller than input '
                         '{}.'.format(tuple(target), x.shape))
    if (big_h, big_w) == (h, w):
        return x
    rows = interpolation_matrix(h, big_h, x.dtype)
    cols = interpolation_matrix(w, big_w, x.dtype)
    tmp = np.tensordot(rows, x.data, axes=([1], [0]))  # H x w x c
    out = np.tensordot(cols, tmp, axes=([1], [1])).transpose(1, 0, 2)

    def backward(g):
        gtmp = np.tensordot(cols, g.transpose(1, 0, 2), axes=([0], [0]))
        gtmp = gtmp.transpose(1, 0, 2)  # H x w x c
        return (np.tensordot(rows, gtmp, axes=([0], [0])),)
    return Tensor.from_op(np.ascontiguousarray(out), (x,), backward)


def top_k_rows(scores, k):
    """
    Indices of the k largest entries of each row, by descending score with
    ties broken by ascending index. Not differentiable.

    Parameters
    ----------
    scores : Tensor or ndarray
        Score matrix m x n.
    k : int
        Number of indices per row, 1 <= k <= n.
    """
    if isinstance(scores, Tensor):
        scores = scores.data
    scores = np.asarray(scores)
    if scores.ndim != 2:
        raise ShapeError('top_k_rows expects a matrix, got shape {}.'.format(
            scores.shape))
    n = scores.shape[1]
    if not 1 <= k <= n:
        raise ValueError('top_k_rows needs 1 <= k <= {}, got {}.'.format(n, k))
    order = np.argsort(-scores, axis=1, kind='stable')
    return order[:, :k]
