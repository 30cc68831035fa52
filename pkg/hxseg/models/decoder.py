"""
All-MLP segmentation decoder.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

from hxseg import ShapeError
from hxseg.autograd import ops, as_tensor
from hxseg.models import Linear, Module


class Decoder(Module):
    """
    Unify per-stage channels, upsample to the input resolution, concatenate
    (stage 1 first), fuse with GELU and predict per-pixel logits.

    Every layer is a 1 x 1 linear map.

    Parameters
    ----------
    in_channels : list
        Widths of the stage features.
    num_classes : int
        Number of output classes.
    rng : RandomState
        Random state for initialization.
    width : int, optional (default 64)
        Decoder width c_dec.
    prefix : str, optional
        Dotted path.
    """
    def __init__(self, in_channels, num_classes, rng, width=64, prefix=''):
        super(Decoder, self).__init__(prefix)
        self.in_channels = list(in_channels)
        self.width, self.num_classes = width, num_classes
        self.unify = []
        for i, c in enumerate(self.in_channels):
            name = 'unify{}'.format(i + 1)
            self.unify.append(self.add_module(
                name, Linear(c, width, rng, self.child_prefix(name))))
        self.fuse = self.add_module(
            'fuse', Linear(len(self.in_channels) * width, width, rng,
                           self.child_prefix('fuse')))
        self.predict = self.add_module(
            'predict', Linear(width, num_classes, rng,
                              self.child_prefix('predict')))

    def forward(self, stage_features, target):
        """
        Parameters
        ----------
        stage_features : list of Tensor
            One h_i x w_i x c_i map per stage.
        target : tuple
            Output size (H, W).

        Returns
        -------
        Raw logits H x W x num_classes.
        """
        if len(stage_features) != len(self.unify):
            raise ShapeError('Decoder expects {} stage features, got {}.'.format(
                len(self.unify), len(stage_features)))
        upsampled = []
        for feature, layer in zip(stage_features, self.unify):
            feature = as_tensor(feature)
            upsampled.append(ops.bilinear_upsample(layer(feature), target))
        fused = ops.gelu(self.fuse(ops.concat(upsampled, axis=-1)))
        return self.predict(fused)
