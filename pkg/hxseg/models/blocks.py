"""
Encoder stage blocks: Fused-MBConv convolution blocks and the efficient
transformer block (spatial-reduction attention plus depthwise feed-forward).
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

import numpy as np

from hxseg import ConfigError, DivisibilityError, ShapeError
from hxseg.autograd import ops, as_tensor
from hxseg.models import (ChannelNorm, Conv2d, ConvBlock, DepthwiseConv,
                          LayerNorm, Linear, Module)


class SqueezeExcite(Module):
    """
    Squeeze-and-excitation gate: global average pool, two linear layers with
    reduction 4 and a sigmoid gate.

    Parameters
    ----------
    channels : int
        Channels of the gated map.
    rng : RandomState
        Random state for initialization.
    prefix : str, optional
        Dotted path.
    """
    def __init__(self, channels, rng, prefix=''):
        super(SqueezeExcite, self).__init__(prefix)
        hidden = max(1, channels // 4)
        self.reduce = self.add_module(
            'reduce', Linear(channels, hidden, rng, self.child_prefix('reduce')))
        self.expand = self.add_module(
            'expand', Linear(hidden, channels, rng, self.child_prefix('expand')))

    def forward(self, x):
        squeezed = x.mean(axis=(0, 1), keepdims=True)
        gate = ops.sigmoid(self.expand(ops.gelu(self.reduce(squeezed))))
        return x * gate


class FusedMBConv(ConvBlock):
    """
    Fused-MBConv block without squeeze-and-excitation.

    A 3 x 3 convolution expands c channels to 2c, followed by normalization
    and GELU; a 1 x 1 convolution projects back to c channels and the result
    is added to the input. Both normalizations are batch-style ChannelNorm
    layers, so the block output depends on the mode (see ChannelNorm).

    Parameters
    ----------
    channels : int
        Input and output channels.
    rng : RandomState
        Random state for initialization.
    prefix : str, optional
        Dotted path.
    """
    name = 'plain'
    expansion = 2

    def __init__(self, channels, rng, prefix=''):
        super(FusedMBConv, self).__init__(prefix)
        self.channels = channels
        self.hidden = self.expansion * channels
        self.expand = self.add_module(
            'expand', Conv2d(channels, self.hidden, rng,
                             prefix=self.child_prefix('expand')))
        self.norm = self.add_module(
            'norm', ChannelNorm(self.hidden, self.child_prefix('norm')))
        self.build_gate(rng)
        self.project = self.add_module(
            'project', Linear(self.hidden, channels, rng,
                              self.child_prefix('project')))
        self.norm2 = self.add_module(
            'norm2', ChannelNorm(channels, self.child_prefix('norm2')))

    def build_gate(self, rng):
        """Hook for subclasses that gate the expanded features."""
        self.se = None

    def expanded(self, x):
        """
        Hidden features before projection, with 2c channels.

        Parameters
        ----------
        x : Tensor
            Input map h x w x c.
        """
        hidden = ops.gelu(self.norm(self.expand(x)))
        if self.se is not None:
            hidden = self.se(hidden)
        return hidden

    def forward(self, x):
        x = as_tensor(x)
        return x + self.norm2(self.project(self.expanded(x)))


class FusedMBConvSE(FusedMBConv):
    """
    Fused-MBConv block with squeeze-and-excitation on the expanded features.
    """
    name = 'with_se'

    def build_gate(self, rng):
        self.se = self.add_module(
            'se', SqueezeExcite(self.hidden, rng, self.child_prefix('se')))


class MBConv(ConvBlock):
    """
    Inverted residual block: 1 x 1 expansion, 3 x 3 depthwise convolution,
    squeeze-and-excitation and 1 x 1 projection.

    Parameters
    ----------
    channels : int
        Input and output channels.
    rng : RandomState
        Random state for initialization.
    prefix : str, optional
        Dotted path.
    """
    name = 'mbconv'
    expansion = 2

    def __init__(self, channels, rng, prefix=''):
        super(MBConv, self).__init__(prefix)
        hidden = self.expansion * channels
        self.channels, self.hidden = channels, hidden
        self.expand = self.add_module(
            'expand', Linear(channels, hidden, rng,
                             self.child_prefix('expand')))
        self.norm = self.add_module(
            'norm', ChannelNorm(hidden, self.child_prefix('norm')))
        self.depthwise = self.add_module(
            'depthwise', DepthwiseConv(hidden, rng,
                                       self.child_prefix('depthwise')))
        self.norm_dw = self.add_module(
            'norm_dw', ChannelNorm(hidden, self.child_prefix('norm_dw')))
        self.se = self.add_module(
            'se', SqueezeExcite(hidden, rng, self.child_prefix('se')))
        self.project = self.add_module(
            'project', Linear(hidden, channels, rng,
                              self.child_prefix('project')))
        self.norm2 = self.add_module(
            'norm2', ChannelNorm(channels, self.child_prefix('norm2')))

    def forward(self, x):
        x = as_tensor(x)
        if x.ndim != 3 or x.shape[-1] != self.channels:
            raise ShapeError('MBConv with {} channels got input shape '
                             '{}.'.format(self.channels, x.shape))
        hidden = ops.gelu(self.norm(self.expand(x)))
        hidden = ops.gelu(self.norm_dw(self.depthwise(hidden)))
        hidden = self.se(hidden)
        return x + self.norm2(self.project(hidden))


def naive_attention(q, k, v, heads=1):
    """
    Dense scaled dot-product attention softmax(Q K^T / sqrt(d)) V.

    Parameters
    ----------
    q : Tensor
        Queries, N x c.
    k : Tensor
        Keys, N_k x c.
    v : Tensor
        Values, N_k x c.
    heads : int, optional (default 1)
        Number of heads; each head uses d = c / heads channels.
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    if q.shape[-1] != k.shape[-1] or k.shape != v.shape:
        raise ShapeError('Attention shapes {}, {}, {} are incompatible.'.format(
            q.shape, k.shape, v.shape))
    n, c = q.shape
    d = c // heads
    qh = q.reshape(n, heads, d).transpose(1, 0, 2)
    kh = k.reshape(k.shape[0], heads, d).transpose(1, 2, 0)
    vh = v.reshape(v.shape[0], heads, d).transpose(1, 0, 2)
    weights = ops.softmax(ops.matmul(qh, kh) * (1. / np.sqrt(d)), axis=-1)
    return ops.matmul(weights, vh).transpose(1, 0, 2).reshape(n, c)


class EMSA(Module):
    """
    Efficient multi-head self-attention.

    Keys and values are shortened before attention: the N x c projection is
    reshaped row-major to (N / R) x (c R) and mapped back to c channels by a
    linear layer. Keys and values use separate reduction layers.

    Parameters
    ----------
    channels : int
        Channels c; must be divisible by heads.
    heads : int
        Number of attention heads.
    reduction : int
        Sequence reduction ratio R.
    rng : RandomState
        Random state for initialization.
    prefix : str, optional
        Dotted path.
    """
    def __init__(self, channels, heads, reduction, rng, prefix=''):
        super(EMSA, self).__init__(prefix)
        if channels % heads:
            raise ConfigError('channels ({}) must be divisible by heads '
                              '({}).'.format(channels, heads))
        self.channels, self.heads, self.reduction = channels, heads, reduction
        for name in ['q', 'k', 'v']:
            setattr(self, name, self.add_module(
                name, Linear(channels, channels, rng, self.child_prefix(name))))
        self.k_reduce = self.add_module(
            'k_reduce', Linear(channels * reduction, channels, rng,
                               self.child_prefix('k_reduce')))
        self.v_reduce = self.add_module(
            'v_reduce', Linear(channels * reduction, channels, rng,
                               self.child_prefix('v_reduce')))
        self.out = self.add_module(
            'out', Linear(channels, channels, rng, self.child_prefix('out')))

    def reduce(self, tokens, layer):
        """
        Shorten an N x c sequence to (N / R) x c.

        Parameters
        ----------
        tokens : Tensor
            Projected keys or values.
        layer : Linear
            Reduction layer mapping c R to c channels.
        """
        n, c = tokens.shape
        return layer(tokens.reshape(n // self.reduction, c * self.reduction))

    def forward(self, x, return_attention=False):
        """
        Parameters
        ----------
        x : Tensor
            Input map h x w x c with h w divisible by R.
        return_attention : bool, optional (default False)
            Also return the heads x N x (N / R) attention weights.
        """
        x = as_tensor(x)
        h, w, c = x.shape
        n = h * w
        if n % self.reduction:
            raise DivisibilityError(
                'Sequence length {} ({}x{}) is not divisible by the reduction '
                'ratio {}.'.format(n, h, w, self.reduction))
        d = c // self.heads
        tokens = x.reshape(n, c)
        q = self.q(tokens).reshape(n, self.heads, d).transpose(1, 0, 2)
        k = self.reduce(self.k(tokens), self.k_reduce)
        v = self.reduce(self.v(tokens), self.v_reduce)
        m = k.shape[0]
        k = k.reshape(m, self.heads, d).transpose(1, 2, 0)
        v = v.reshape(m, self.heads, d).transpose(1, 0, 2)
        scores = ops.matmul(q, k, label='attention_scores') * (1. / np.sqrt(d))
        weights = ops.softmax(scores, axis=-1)
        context = ops.matmul(weights, v, label='attention_context')
        context = context.transpose(1, 0, 2).reshape(n, c)
        out = self.out(context).reshape(h, w, c)
        if return_attention:
            return out, weights
        return out


class DWFFN(Module):
    """
    Feed-forward network with a 3 x 3 depthwise convolution between its two
    linear layers: fc2(GELU(DWConv(fc1(x)))).

    Parameters
    ----------
    c_in : int
        Input channels.
    hidden : int
        Hidden channels.
    c_out : int
        Output channels.
    rng : RandomState
        Random state for initialization.
    prefix : str, optional
        Dotted path.
    """
    def __init__(self, c_in, hidden, c_out, rng, prefix=''):
        super(DWFFN, self).__init__(prefix)
        self.fc1 = self.add_module(
            'fc1', Linear(c_in, hidden, rng, self.child_prefix('fc1')))
        self.depthwise = self.add_module(
            'depthwise', DepthwiseConv(hidden, rng,
                                       self.child_prefix('depthwise')))
        self.fc2 = self.add_module(
            'fc2', Linear(hidden, c_out, rng, self.child_prefix('fc2')))

    def forward(self, x):
        return self.fc2(ops.gelu(self.depthwise(self.fc1(x))))


class TransformerBlock(Module):
    """
    Pre-norm transformer block: x' = x + EMSA(LN(x)), y = x' + DWFFN(LN(x')).

    The feed-forward network expands channels by a factor of 2.

    Parameters
    ----------
    channels : int
        Channels.
    heads : int
        Attention heads.
    reduction : int
        Key/value reduction ratio.
    rng : RandomState
        Random state for initialization.
    prefix : str, optional
        Dotted path.
    """
    expansion = 2

    def __init__(self, channels, heads, reduction, rng, prefix=''):
        super(TransformerBlock, self).__init__(prefix)
        self.norm1 = self.add_module(
            'norm1', LayerNorm(channels, self.child_prefix('norm1')))
        self.attn = self.add_module(
            'attn', EMSA(channels, heads, reduction, rng,
                         self.child_prefix('attn')))
        self.norm2 = self.add_module(
            'norm2', LayerNorm(channels, self.child_prefix('norm2')))
        self.ffn = self.add_module(
            'ffn', DWFFN(channels, self.expansion * channels, channels, rng,
                         self.child_prefix('ffn')))

    def forward(self, x):
        x = as_tensor(x)
        x = x + self.attn(self.norm1(x))
        return x + self.ffn(self.norm2(x))
