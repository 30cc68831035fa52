"""
Cross-modal feature interaction and fusion.

Each branch is cut into an s x s grid of regions. Regions are routed to their
top-k partners by comparing region-mean queries and keys, keys and values of
the routed regions are gathered, and every token attends over its gathered
context with the values of the other modality. The two attention outputs are
concatenated and fused by a depthwise feed-forward network.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

import numpy as np

from hxseg import ConfigError, DivisibilityError, ShapeError
from hxseg.autograd import ops, as_tensor, Tensor
from hxseg.models import Linear, Module
from hxseg.models.blocks import DWFFN


def _check_grid(h, w, s):
    if h % s or w % s:
        raise DivisibilityError(
            'Region grid {0}x{0} does not divide a {1}x{2} map.'.format(
                s, h, w))


def partition_regions(f, s):
    """
    Split an h x w x c map into s^2 regions of hw / s^2 tokens.

    Regions are ordered row-major over the grid and tokens row-major within
    each region.

    Parameters
    ----------
    f : Tensor
        Map h x w x c.
    s : int
        Grid side.
    """
    f = as_tensor(f)
    h, w, c = f.shape
    _check_grid(h, w, s)
    tiles = f.reshape(s, h // s, s, w // s, c).transpose(0, 2, 1, 3, 4)
    return tiles.reshape(s * s, (h // s) * (w // s), c)


def departition(regions, s, h, w):
    """
    Inverse of partition_regions.

    Parameters
    ----------
    regions : Tensor
        Regions s^2 x (hw / s^2) x c.
    s : int
        Grid side.
    h, w : int
        Output spatial size.
    """
    regions = as_tensor(regions)
    _check_grid(h, w, s)
    c = regions.shape[-1]
    tiles = regions.reshape(s, s, h // s, w // s, c).transpose(0, 2, 1, 3, 4)
    return tiles.reshape(h, w, c)


def region_adjacency(q, k):
    """
    Region-to-region affinity A = Q^r (K^r)^T from region-mean queries and
    keys, as an s^2 x s^2 array.

    Parameters
    ----------
    q, k : Tensor or ndarray
        Partitioned queries and keys, s^2 x m x c.
    """
    q = q.data if isinstance(q, Tensor) else np.asarray(q)
    k = k.data if isinstance(k, Tensor) else np.asarray(k)
    return np.dot(q.mean(axis=1), k.mean(axis=1).T)


def route_regions(q, k, topk):
    """
    Indices of the top-k partner regions of every region (s^2 x k).

    The selection is treated as a constant of the forward pass.

    Parameters
    ----------
    q, k : Tensor or ndarray
        Partitioned queries and keys, s^2 x m x c.
    topk : int
        Regions kept per row, 1 <= topk <= s^2.
    """
    return ops.top_k_rows(region_adjacency(q, k), topk)


def gather_kv(k, v, idx):
    """
    Collect the tokens of each region's routed regions, in index order.

    Parameters
    ----------
    k, v : Tensor
        Partitioned keys and values, s^2 x m x c.
    idx : ndarray
        Region index, s^2 x topk.

    Returns
    -------
    Gathered keys and values, each s^2 x (topk m) x c.
    """
    k, v = as_tensor(k), as_tensor(v)
    idx = np.asarray(idx)
    n_regions, m, c = k.shape
    if v.shape[:2] != k.shape[:2]:
        raise ShapeError('Key shape {} and value shape {} do not pair.'.format(
            k.shape, v.shape))
    if idx.ndim != 2 or idx.shape[0] != n_regions:
        raise ShapeError('Region index of shape {} does not match {} '
                         'regions.'.format(idx.shape, n_regions))
    if idx.size and (idx.min() < 0 or idx.max() >= n_regions):
        raise IndexError('Region index out of range [0, {}).'.format(
            n_regions))
    topk = idx.shape[1]
    k_g = k[idx].reshape(n_regions, topk * m, c)
    v_g = v[idx].reshape(n_regions, topk * m, v.shape[-1])
    return k_g, v_g


def region_attention(q, k, v):
    """
    Single-head attention of each region's queries over its gathered context,
    scaled by 1 / sqrt(c).

    Parameters
    ----------
    q : Tensor
        Queries s^2 x m x c.
    k, v : Tensor
        Gathered keys and values s^2 x n x c.
    """
    scale = 1. / np.sqrt(q.shape[-1])
    scores = ops.matmul(q, k.transpose(0, 2, 1), label='attention_scores')
    weights = ops.softmax(scores * scale, axis=-1)
    return ops.matmul(weights, v, label='attention_context')


class FIFM(Module):
    """
    Feature interaction and fusion module.

    Parameters
    ----------
    channels : int
        Channels c of each branch.
    regions : int
        Grid side s.
    topk : int
        Routed regions per region, 1 <= topk <= s^2.
    rng : RandomState
        Random state for initialization.
    c_out : int, optional
        Fused output width (default c).
    prefix : str, optional
        Dotted path.
    """
    def __init__(self, channels, regions, topk, rng, c_out=None, prefix=''):
        super(FIFM, self).__init__(prefix)
        if not 1 <= topk <= regions * regions:
            raise ConfigError('FIFM top-k must lie in [1, s^2 = {}], got '
                              '{}.'.format(regions * regions, topk))
        if c_out is None:
            c_out = channels
        self.channels, self.regions, self.topk = channels, regions, topk
        self.c_out = c_out
        for modality in ['hsi', 'x']:
            for kind in ['q', 'k', 'v']:
                name = '{}_{}'.format(kind, modality)
                setattr(self, name, self.add_module(
                    name, Linear(channels, channels, rng,
                                 self.child_prefix(name))))
        self.fusion = self.add_module(
            'fusion', DWFFN(2 * channels, 2 * channels, c_out, rng,
                            self.child_prefix('fusion')))

    def project(self, f, modality):
        """Partition a branch and project it to (Q, K, V)."""
        regions = partition_regions(f, self.regions)
        return tuple(getattr(self, '{}_{}'.format(kind, modality))(regions)
                     for kind in ['q', 'k', 'v'])

    def interact(self, f_hsi, f_x):
        """
        Cross-modal attention outputs (O_hsi, O_x), each h x w x c.

        HSI queries attend over HSI keys with X values gathered under the HSI
        routing index, and symmetrically for X.

        Parameters
        ----------
        f_hsi, f_x : Tensor
            Branch features of identical shape h x w x c.
        """
        f_hsi, f_x = as_tensor(f_hsi), as_tensor(f_x)
        if f_hsi.shape != f_x.shape:
            raise ShapeError('FIFM branch shapes differ: {} vs {}.'.format(
                f_hsi.shape, f_x.shape))
        h, w, _ = f_hsi.shape
        _check_grid(h, w, self.regions)
        q_hsi, k_hsi, v_hsi = self.project(f_hsi, 'hsi')
        q_x, k_x, v_x = self.project(f_x, 'x')
        idx_hsi = route_regions(q_hsi, k_hsi, self.topk)
        idx_x = route_regions(q_x, k_x, self.topk)
        k_g_hsi, v_g_x = gather_kv(k_hsi, v_x, idx_hsi)
        k_g_x, v_g_hsi = gather_kv(k_x, v_hsi, idx_x)
        o_hsi = region_attention(q_hsi, k_g_hsi, v_g_x)
        o_x = region_attention(q_x, k_g_x, v_g_hsi)
        return (departition(o_hsi, self.regions, h, w),
                departition(o_x, self.regions, h, w))

    def forward(self, f_hsi, f_x):
        o_hsi, o_x = self.interact(f_hsi, f_x)
        return self.fusion(ops.concat([o_hsi, o_x], axis=-1))


class ConcatFusion(Module):
    """
    Fusion without interaction: channel concat followed by a linear layer.

    Parameters
    ----------
    channels : int
        Channels c of each branch.
    rng : RandomState
        Random state for initialization.
    c_out : int, optional
        Output width (default c).
    prefix : str, optional
        Dotted path.
    """
    def __init__(self, channels, rng, c_out=None, prefix=''):
        super(ConcatFusion, self).__init__(prefix)
        if c_out is None:
            c_out = channels
        self.c_out = c_out
        self.linear = self.add_module(
            'linear', Linear(2 * channels, c_out, rng,
                             self.child_prefix('linear')))

    def forward(self, f_hsi, f_x):
        f_hsi, f_x = as_tensor(f_hsi), as_tensor(f_x)
        if f_hsi.shape != f_x.shape:
            raise ShapeError('Branch shapes differ: {} vs {}.'.format(
                f_hsi.shape, f_x.shape))
        return self.linear(ops.concat([f_hsi, f_x], axis=-1))
