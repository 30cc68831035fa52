"""
Dense channels-last tensors with reverse-mode differentiation.

Every op in hxseg.autograd.ops records its parents and a backward closure on
the Tensor it returns. Calling backward() on a scalar walks that graph once in
reverse topological order and accumulates gradients into leaf tensors
(Parameters included).
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

from collections import OrderedDict
import contextlib

import numpy as np

_state = {'dtype': np.dtype(np.float64),
          'grad_enabled': True,
          'macs': None}


def set_default_dtype(dtype):
    """
    Set the floating point precision used for new tensors.

    Parameters
    ----------
    dtype : str or numpy dtype
        One of 'f32', 'f64', float32 or float64.
    """
    aliases = {'f32': np.float32, 'f64': np.float64,
               'real32': np.float32, 'real64': np.float64}
    dtype = np.dtype(aliases.get(dtype, dtype))
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError("Unsupported precision '{}'.".format(dtype))
    _state['dtype'] = dtype


def get_default_dtype():
    """Get the floating point precision used for new tensors."""
    return _state['dtype']


@contextlib.contextmanager
def default_dtype(dtype):
    """
    Temporarily change the default precision.

    Parameters
    ----------
    dtype : str or numpy dtype
        Precision, see set_default_dtype.
    """
    previous = _state['dtype']
    set_default_dtype(dtype)
    try:
        yield
    finally:
        _state['dtype'] = previous


@contextlib.contextmanager
def no_grad():
    """
    Evaluate ops without recording a graph.
    """
    previous = _state['grad_enabled']
    _state['grad_enabled'] = False
    try:
        yield
    finally:
        _state['grad_enabled'] = previous


class MacCounter(object):
    """
    Multiply-accumulate counts keyed by op label.
    """
    def __init__(self):
        self.counts = OrderedDict()

    def add(self, label, n):
        """
        Add n multiply-accumulates under label.

        Parameters
        ----------
        label : str
            Op label, for example 'conv2d' or 'attention_scores'.
        n : int
            Number of multiply-accumulates.
        """
        self.counts[label] = self.counts.get(label, 0) + int(n)

    def __getitem__(self, label):
        return self.counts.get(label, 0)

    def total(self):
        """Total multiply-accumulates over all labels."""
        return sum(self.counts.values())


@contextlib.contextmanager
def count_macs():
    """
    Count multiply-accumulates of the ops evaluated inside the block.

    Yields a MacCounter.
    """
    previous = _state['macs']
    counter = MacCounter()
    _state['macs'] = counter
    try:
        yield counter
    finally:
        _state['macs'] = previous


def record_macs(label, n):
    """
    Record multiply-accumulates if a counter is active.

    Parameters
    ----------
    label : str
        Op label.
    n : int
        Number of multiply-accumulates.
    """
    if _state['macs'] is not None:
        _state['macs'].add(label, n)


def unbroadcast(grad, shape):
    """
    Sum a broadcast gradient back down to shape.

    Parameters
    ----------
    grad : ndarray
        Gradient with the broadcast shape.
    shape : tuple
        Shape of the operand before broadcasting.
    """
    if grad.shape == tuple(shape):
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor(object):
    """
    Dense n-dimensional real array.

    Parameters
    ----------
    data : array_like
        Values. Converted to the default precision unless dtype is given.
    requires_grad : bool, optional (default False)
        Whether gradients should be accumulated into this tensor.
    dtype : numpy dtype, optional
        Explicit precision.
    """
    __array_priority__ = 100  # ndarray <op> Tensor dispatches to Tensor

    def __init__(self, data, requires_grad=False, dtype=None):
        if dtype is None:
            dtype = _state['dtype']
        self.data = np.array(data, dtype=dtype)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @classmethod
    def from_op(cls, data, parents, backward):
        """
        Wrap the result of an op.

        Parameters
        ----------
        data : ndarray
            Forward result.
        parents : sequence of Tensor
            Op inputs.
        backward : callable
            Maps the output gradient to one gradient (or None) per parent.
        """
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out.requires_grad = (_state['grad_enabled'] and
                             any(p.requires_grad for p in parents))
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return 'Tensor(shape={}, dtype={})'.format(self.shape, self.dtype)

    def numpy(self):
        """Get the underlying array."""
        return self.data

    def item(self):
        """Get the value of a single-element tensor."""
        return self.data.item()

    def detach(self):
        """Get a copy of this tensor outside any graph."""
        return Tensor(self.data.copy(), dtype=self.data.dtype)

    def zero_grad(self):
        """Reset the accumulated gradient."""
        self.grad = None

    def _topological_order(self):
        """
        Nodes that need gradients, consumers before producers.
        """
        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        order.reverse()
        return order

    def backward(self, grad=None):
        """
        Accumulate gradients of this tensor into every leaf of its graph.

        Parameters
        ----------
        grad : array_like, optional
            Gradient of the final objective with respect to this tensor.
            Defaults to 1 for single-element tensors.
        """
        if not self.requires_grad:
            raise ValueError('Tensor does not require gradients.')
        if grad is None:
            if self.size != 1:
                raise ValueError(
                    'Gradient must be given for non-scalar output of shape '
                    '{}.'.format(self.shape))
            grad = np.ones_like(self.data)
        grads = {id(self): np.asarray(grad, dtype=self.dtype)}
        for node in self._topological_order():
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:  # leaf
                if node.grad is None:
                    node.grad = g.copy()
                else:
                    node.grad = node.grad + g
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # arithmetic
    def __add__(self, other):
        return ops.add(self, other)

    def __radd__(self, other):
        return ops.add(other, self)

    def __sub__(self, other):
        return ops.sub(self, other)

    def __rsub__(self, other):
        return ops.sub(other, self)

    def __mul__(self, other):
        return ops.mul(self, other)

    def __rmul__(self, other):
        return ops.mul(other, self)

    def __truediv__(self, other):
        return ops.div(self, other)

    def __rtruediv__(self, other):
        return ops.div(other, self)

    def __neg__(self):
        return ops.neg(self)

    def __matmul__(self, other):
        return ops.matmul(self, other)

    def __getitem__(self, key):
        return ops.getitem(self, key)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return ops.sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return ops.mean(self, axis, keepdims)


class Parameter(Tensor):
    """
    Named trainable tensor.

    Parameters
    ----------
    name : str
        Dotted path, for example 'stage1.hsi.block0.expand.weight'.
    value : array_like
        Initial value.
    dtype : numpy dtype, optional
        Explicit precision.
    """
    def __init__(self, name, value, dtype=None):
        super(Parameter, self).__init__(value, requires_grad=True, dtype=dtype)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return 'Parameter({}, shape={})'.format(self.name, self.shape)

    def zero_grad(self):
        """Reset the gradient to zeros of the value's shape."""
        self.grad = np.zeros_like(self.data)


def as_tensor(value):
    """
    Wrap a constant as a Tensor (tensors pass through).

    Parameters
    ----------
    value : Tensor or array_like
        Value.
    """
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


from . import ops  # noqa: E402  (ops needs Tensor defined above)
