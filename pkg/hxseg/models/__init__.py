"""
Model building blocks.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

from collections import OrderedDict

import numpy as np

from hxseg import ConfigError, ShapeError
from hxseg.autograd import as_tensor, get_default_dtype, ops, Parameter


def get_conv_blocks():
    """Compile a dict mapping variant names to convolution block classes."""

    # import all ConvBlock subclasses so __subclasses__ will work
    # these have to be local imports to avoid circular imports
    from .blocks import FusedMBConv, FusedMBConvSE, MBConv  # noqa: F401

    blocks = {}
    stack = list(ConvBlock.__subclasses__())
    while stack:
        klass = stack.pop(0)
        stack.extend(klass.__subclasses__())
        assert klass.name is not None, (klass.__name__ +
                                        " 'name' attribute is None.")
        assert klass.name not in blocks
        blocks[klass.name] = klass
    return blocks


def resolve_conv_block(name):
    """
    Resolve a convolution block class from its variant name.

    Parameters
    ----------
    name : str
        Variant name: 'plain', 'with_se' or 'mbconv'.
    """
    blocks = get_conv_blocks()
    if name not in blocks:
        raise ConfigError("Unknown conv variant '{}'; choose from {}.".format(
            name, sorted(blocks)))
    return blocks[name]


class Buffer(object):
    """
    Named non-trainable array stored with a module, such as running
    normalization statistics.

    Parameters
    ----------
    name : str
        Dotted path.
    value : array_like
        Initial value, stored at the default precision.
    """
    def __init__(self, name, value):
        self.name = name
        self.data = np.array(value, dtype=get_default_dtype())

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return 'Buffer({}, shape={})'.format(self.name, self.shape)


class Module(object):
    """
    Container of named Parameters and child modules.

    Child classes register parameters with add_param, running state with
    add_buffer and children with add_module in __init__, and implement
    forward. Names are dotted paths built from the module's prefix.

    Modules are built in inference mode; train() switches the whole tree to
    training mode and eval() switches it back.

    Parameters
    ----------
    prefix : str, optional
        Dotted path of this module inside the model.
    """
    def __init__(self, prefix=''):
        self.prefix = prefix
        self.params = OrderedDict()
        self.buffers = OrderedDict()
        self.children = OrderedDict()
        self.training = False

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError('forward is not defined.')

    def child_prefix(self, name):
        """
        Dotted path for a child or parameter.

        Parameters
        ----------
        name : str
            Local name.
        """
        if self.prefix:
            return '{}.{}'.format(self.prefix, name)
        return name

    def add_param(self, name, value):
        """
        Register a parameter.

        Parameters
        ----------
        name : str
            Local name, for example 'weight'.
        value : array_like
            Initial value.
        """
        param = Parameter(self.child_prefix(name), value)
        self.params[name] = param
        return param

    def add_buffer(self, name, value):
        """
        Register a non-trainable array.

        Parameters
        ----------
        name : str
            Local name, for example 'running_mean'.
        value : array_like
            Initial value.
        """
        buf = Buffer(self.child_prefix(name), value)
        self.buffers[name] = buf
        return buf

    def add_module(self, name, module):
        """
        Register a child module.

        Parameters
        ----------
        name : str
            Local name.
        module : Module
            Child built with prefix self.child_prefix(name).
        """
        self.children[name] = module
        return module

    def named_parameters(self):
        """
        Parameters in registration order, keyed by full dotted name.
        """
        rval = OrderedDict()
        for param in self.params.values():
            rval[param.name] = param
        for child in self.children.values():
            for name, param in child.named_parameters().items():
                if name in rval:
                    raise ValueError(
                        "Duplicate parameter name '{}'.".format(name))
                rval[name] = param
        return rval

    def named_buffers(self):
        """
        Buffers in registration order, keyed by full dotted name.
        """
        rval = OrderedDict((buf.name, buf) for buf in self.buffers.values())
        for child in self.children.values():
            rval.update(child.named_buffers())
        return rval

    def named_state(self):
        """
        Parameters followed by buffers: everything a checkpoint stores.
        """
        rval = self.named_parameters()
        for name, buf in self.named_buffers().items():
            if name in rval:
                raise ValueError("Duplicate state name '{}'.".format(name))
            rval[name] = buf
        return rval

    def parameters(self):
        """List of parameters in registration order."""
        return list(self.named_parameters().values())

    def train(self, mode=True):
        """
        Set training mode on this module and every descendant.

        Parameters
        ----------
        mode : bool, optional (default True)
            True for training, False for inference.
        """
        self.training = mode
        for child in self.children.values():
            child.train(mode)
        return self

    def eval(self):
        """Set inference mode on this module and every descendant."""
        return self.train(False)

    def num_parameters(self):
        """Total number of scalar parameters."""
        return int(sum(p.size for p in self.parameters()))

    def zero_grad(self):
        """Reset every parameter gradient."""
        for param in self.parameters():
            param.zero_grad()


def init_weight(rng, shape, fan_in):
    """
    Normal initialization scaled by 1 / sqrt(fan_in).

    Parameters
    ----------
    rng : RandomState
        Random state.
    shape : tuple
        Weight shape.
    fan_in : int
        Number of inputs feeding each output.
    """
    return rng.normal(scale=1. / np.sqrt(fan_in), size=shape)


class Linear(Module):
    """
    Affine map over channels (also used for 1 x 1 convolutions).

    Parameters
    ----------
    c_in : int
        Input channels.
    c_out : int
        Output channels.
    rng : RandomState
        Random state for initialization.
    prefix : str, optional
        Dotted path.
    """
    def __init__(self, c_in, c_out, rng, prefix=''):
        super(Linear, self).__init__(prefix)
        self.c_in, self.c_out = c_in, c_out
        self.weight = self.add_param('weight',
                                     init_weight(rng, (c_in, c_out), c_in))
        self.bias = self.add_param('bias', np.zeros(c_out))

    def forward(self, x):
        return ops.linear(x, self.weight, self.bias)


class Conv2d(Module):
    """
    k x k convolution with same padding.

    Parameters
    ----------
    c_in : int
        Input channels.
    c_out : int
        Output channels.
    rng : RandomState
        Random state for initialization.
    kernel : int, optional (default 3)
        Kernel size.
    stride : int, optional (default 1)
        Stride.
    prefix : str, optional
        Dotted path.
    """
    def __init__(self, c_in, c_out, rng, kernel=3, stride=1, prefix=''):
        super(Conv2d, self).__init__(prefix)
        self.stride = stride
        fan_in = kernel * kernel * c_in
        self.weight = self.add_param(
            'weight', init_weight(rng, (kernel, kernel, c_in, c_out), fan_in))
        self.bias = self.add_param('bias', np.zeros(c_out))

    def forward(self, x):
        return ops.conv2d(x, self.weight, self.bias, stride=self.stride)


class DepthwiseConv(Module):
    """
    3 x 3 depthwise convolution.

    Parameters
    ----------
    channels : int
        Channels.
    rng : RandomState
        Random state for initialization.
    prefix : str, optional
        Dotted path.
    """
    def __init__(self, channels, rng, prefix=''):
        super(DepthwiseConv, self).__init__(prefix)
        self.weight = self.add_param(
            'weight', init_weight(rng, (3, 3, channels), 9))
        self.bias = self.add_param('bias', np.zeros(channels))

    def forward(self, x):
        return ops.depthwise_conv3x3(x, self.weight, self.bias)


class LayerNorm(Module):
    """
    Layer normalization over channels with learned affine.

    Parameters
    ----------
    channels : int
        Channels.
    prefix : str, optional
        Dotted path.
    """
    def __init__(self, channels, prefix=''):
        super(LayerNorm, self).__init__(prefix)
        self.gamma = self.add_param('gamma', np.ones(channels))
        self.beta = self.add_param('beta', np.zeros(channels))

    def forward(self, x):
        return ops.layer_norm(x, self.gamma, self.beta)


class ChannelNorm(Module):
    """
    Batch-style per-channel normalization with learned affine.

    In training mode each channel is standardized with the mean and variance
    over the spatial positions of the map, and the running statistics move
    towards them with the given momentum (the running variance uses the
    unbiased estimate). In inference mode the running statistics are used,
    so the output of a position does not depend on the rest of the map.

    Parameters
    ----------
    channels : int
        Channels.
    prefix : str, optional
        Dotted path.
    momentum : float, optional (default 0.1)
        Weight of the current map in the running statistics.
    eps : float, optional (default 1e-5)
        Variance floor.
    """
    def __init__(self, channels, prefix='', momentum=0.1, eps=1e-5):
        super(ChannelNorm, self).__init__(prefix)
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = self.add_param('gamma', np.ones(channels))
        self.beta = self.add_param('beta', np.zeros(channels))
        self.running_mean = self.add_buffer('running_mean',
                                            np.zeros(channels))
        self.running_var = self.add_buffer('running_var', np.ones(channels))

    def update_statistics(self, x):
        """
        Move the running statistics towards those of a map.

        Parameters
        ----------
        x : ndarray
            Map h x w x channels.
        """
        n = x.shape[0] * x.shape[1]
        if n < 2:
            raise ShapeError('Training-mode normalization needs more than one '
                             'position per channel, got a {}x{} map.'.format(
                                 x.shape[0], x.shape[1]))
        m = self.momentum
        mean = np.mean(x, axis=(0, 1))
        var = np.var(x, axis=(0, 1)) * n / (n - 1.)
        self.running_mean.data = (1 - m) * self.running_mean.data + m * mean
        self.running_var.data = (1 - m) * self.running_var.data + m * var

    def forward(self, x):
        x = as_tensor(x)
        if x.ndim != 3 or x.shape[-1] != self.channels:
            raise ShapeError('ChannelNorm over {} channels got input shape '
                             '{}.'.format(self.channels, x.shape))
        if self.training:
            self.update_statistics(x.data)
            return ops.channel_norm(x, self.gamma, self.beta, self.eps)
        return ops.channel_affine(x, self.running_mean.data,
                                  self.running_var.data, self.gamma,
                                  self.beta, self.eps)


class ConvBlock(Module):
    """
    Residual convolution block of a convolution stage.

    Class Attributes
    ----------------
    name : str
        Variant name used by ModelConfig.conv_variant.
    """
    name = None
