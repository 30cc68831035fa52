"""
Cross-modality feature enhancement.

Both branches are concatenated (HSI channels first), strip-pooled along each
spatial axis, squeezed jointly and expanded into direction-aware sigmoid gates
that recalibrate each branch.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

from hxseg import DivisibilityError, ShapeError
from hxseg.autograd import ops, as_tensor
from hxseg.models import Linear, Module


class FEM(Module):
    """
    Feature enhancement module.

    Parameters
    ----------
    channels : int
        Channels c of each branch.
    ratio : int
        Bottleneck reduction r; 2c must be divisible by r.
    rng : RandomState
        Random state for initialization.
    prefix : str, optional
        Dotted path.
    """
    def __init__(self, channels, ratio, rng, prefix=''):
        super(FEM, self).__init__(prefix)
        joint = 2 * channels
        if joint % ratio:
            raise DivisibilityError(
                'FEM ratio {} does not divide 2c = {}.'.format(ratio, joint))
        self.channels, self.ratio = channels, ratio
        self.bottleneck = joint // ratio
        self.joint = self.add_module(
            'joint', Linear(joint, self.bottleneck, rng,
                            self.child_prefix('joint')))
        self.gate_h = self.add_module(
            'gate_h', Linear(self.bottleneck, joint, rng,
                             self.child_prefix('gate_h')))
        self.gate_w = self.add_module(
            'gate_w', Linear(self.bottleneck, joint, rng,
                             self.child_prefix('gate_w')))

    def squeeze(self, fused):
        """
        Pool a 2c-channel map along both axes and apply the joint bottleneck.

        Returns the (h + w) x 1 x 2c/r descriptor; its first h rows belong to
        the horizontal strip.

        Parameters
        ----------
        fused : Tensor
            Concatenated map h x w x 2c.
        """
        pooled_h = ops.strip_pool(fused, 'horizontal')  # h x 1 x 2c
        pooled_v = ops.strip_pool(fused, 'vertical')  # 1 x w x 2c
        stacked = ops.concat([pooled_h, pooled_v.transpose(1, 0, 2)], axis=0)
        return ops.gelu(self.joint(stacked))

    def gates(self, f_hsi, f_x):
        """
        Attention maps (G_hsi, G_x), each h x w x c with values in (0, 1).

        Parameters
        ----------
        f_hsi, f_x : Tensor
            Branch features of identical shape h x w x c.
        """
        f_hsi, f_x = as_tensor(f_hsi), as_tensor(f_x)
        if f_hsi.shape != f_x.shape:
            raise ShapeError('FEM branch shapes differ: {} vs {}.'.format(
                f_hsi.shape, f_x.shape))
        h, w, c = f_hsi.shape
        squeezed = self.squeeze(ops.concat([f_hsi, f_x], axis=-1))
        gate_h = ops.sigmoid(self.gate_h(squeezed[:h]))  # h x 1 x 2c
        gate_w = ops.sigmoid(
            self.gate_w(squeezed[h:].transpose(1, 0, 2)))  # 1 x w x 2c
        gate = gate_h * gate_w
        return gate[:, :, :c], gate[:, :, c:]

    def forward(self, f_hsi, f_x):
        gate_hsi, gate_x = self.gates(f_hsi, f_x)
        return f_hsi * gate_hsi, f_x * gate_x
