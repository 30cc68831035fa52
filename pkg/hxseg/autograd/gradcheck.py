"""
Finite-difference verification of reverse-mode gradients.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

import numpy as np

from hxseg import ShapeError
from hxseg.autograd import no_grad


class GradCheckReport(object):
    """
    Outcome of a gradient check.

    Parameters
    ----------
    name : str
        Name of the checked op or composite.
    max_rel_error : float
        Largest element-wise relative error.
    element_count : int
        Number of compared elements.
    worst : tuple, optional
        (input index, flat element index) of the largest error.
    """
    def __init__(self, name, max_rel_error, element_count, worst=None):
        self.name = name
        self.max_rel_error = float(max_rel_error)
        self.element_count = int(element_count)
        self.worst = worst

    def __repr__(self):
        return 'GradCheckReport({}, max_rel_error={:.3e}, n={})'.format(
            self.name, self.max_rel_error, self.element_count)

    def passed(self, tolerance):
        """
        Whether the check is within tolerance.

        Parameters
        ----------
        tolerance : float
            Maximum allowed relative error.
        """
        return self.max_rel_error < tolerance


def grad_check(func, inputs, eps=1e-5, name=None, n_samples=None, seed=0,
               atol=0.):
    """
    Compare reverse-mode gradients of a scalar function with central
    differences (f(x + eps) - f(x - eps)) / (2 eps).

    The relative error of each element is |a - n| / max(|a|, |n|, 1e-8);
    elements with |a - n| <= atol count as exact.

    Parameters
    ----------
    func : callable
        Maps the input tensors to a single-element Tensor.
    inputs : list of Tensor
        float64 tensors to differentiate with respect to. Their data is
        perturbed in place and restored.
    eps : float, optional (default 1e-5)
        Finite-difference step.
    name : str, optional
        Report name. Defaults to func.__name__.
    n_samples : int, optional
        If given, compare a seeded random subset of this many elements
        instead of every element. Every non-empty input contributes at least
        one element, so the subset grows to the number of inputs if needed.
    seed : int, optional (default 0)
        Seed for element sampling.
    atol : float, optional (default 0.)
        Absolute agreement floor for gradients that are structurally zero,
        where central differences only return rounding noise.
    """
    if eps <= 0:
        raise ValueError('eps must be positive, got {}.'.format(eps))
    if name is None:
        name = getattr(func, '__name__', 'composite')
    for tensor in inputs:
        if tensor.dtype != np.float64:
            raise ValueError('grad_check requires real64 inputs, got '
                             '{}.'.format(tensor.dtype))
        tensor.data = np.ascontiguousarray(tensor.data)
        tensor.requires_grad = True
        tensor.grad = np.zeros_like(tensor.data)

    loss = func(*inputs)
    if loss.size != 1:
        raise ShapeError('grad_check needs a scalar loss, got shape '
                         '{}.'.format(loss.shape))
    loss.backward()
    analytic = [tensor.grad.copy() for tensor in inputs]

    # (input index, flat index) pairs to compare
    sizes = [tensor.size for tensor in inputs]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    if n_samples is not None and n_samples < total:
        flat = _sample_elements(sizes, n_samples, seed)
    else:
        flat = np.arange(total)

    max_error, worst = 0., None
    with no_grad():
        for position in flat:
            i = int(np.searchsorted(offsets, position, side='right') - 1)
            j = int(position - offsets[i])
            data = inputs[i].data.reshape(-1)
            original = data[j]
            data[j] = original + eps
            f_plus = func(*inputs).item()
            data[j] = original - eps
            f_minus = func(*inputs).item()
            data[j] = original
            numeric = (f_plus - f_minus) / (2. * eps)
            a = analytic[i].reshape(-1)[j]
            denominator = max(abs(a), abs(numeric), 1e-8)
            error = 0. if abs(a - numeric) <= atol else (
                abs(a - numeric) / denominator)
            if error > max_error or worst is None:
                max_error, worst = error, (i, j)
    return GradCheckReport(name, max_error, len(flat), worst)


def _sample_elements(sizes, n_samples, seed):
    """
    Sorted flat positions over concatenated inputs: one from every
    non-empty input, then uniform without replacement up to n_samples.

    Parameters
    ----------
    sizes : list
        Element count of each input.
    n_samples : int
        Requested number of elements.
    seed : int
        Seed.
    """
    rng = np.random.RandomState(seed)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    chosen = [offsets[i] + rng.randint(size)
              for i, size in enumerate(sizes) if size]
    rest = np.setdiff1d(np.arange(offsets[-1]), chosen)
    extra = min(max(n_samples - len(chosen), 0), len(rest))
    flat = np.concatenate([chosen, rng.choice(rest, extra, replace=False)])
    return np.sort(flat.astype(int))
