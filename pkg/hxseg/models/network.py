"""
Two-branch segmentation network.

Each branch (HSI and X) has a stem convolution followed by four stages of
convolution or transformer blocks. After every stage the two branches are
recalibrated jointly (FEM), and the enhanced pair is fused (FIFM) into the
stage feature consumed by the decoder.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

from collections import OrderedDict
import copy
import dataclasses
from dataclasses import dataclass, field
import re

import numpy as np

from hxseg import ConfigError, DivisibilityError, ShapeError
from hxseg.autograd import as_tensor
from hxseg.models import Conv2d, Module, resolve_conv_block
from hxseg.models.blocks import TransformerBlock
from hxseg.models.decoder import Decoder
from hxseg.models.fem import FEM
from hxseg.models.fifm import ConcatFusion, FIFM
from hxseg.utils import (check_no_extra_keys, format_key_values, format_value,
                         parse_key_values, parse_list, pop_typed)

STAGE_KINDS = {'C': 'conv', 'T': 'transformer'}
LAYOUT_PATTERN = re.compile(r'^C+T*$|^T+$')
NUM_STAGES = 4
FIELD_TYPES = {'conv_variant': str, 'use_fem': bool, 'use_fifm': bool}


@dataclass
class StageConfig(object):
    """
    One encoder stage.

    Parameters
    ----------
    kind : str
        'conv' or 'transformer'.
    depth : int
        Number of blocks.
    channels : int
        Stage width.
    heads : int
        Attention heads (transformer stages).
    reduction : int
        Key/value reduction ratio (transformer stages).
    downsample_after : bool
        Whether the next stage halves the resolution.
    """
    kind: str = 'conv'
    depth: int = 2
    channels: int = 32
    heads: int = 1
    reduction: int = 1
    downsample_after: bool = False

    @property
    def letter(self):
        return 'T' if self.kind == 'transformer' else 'C'


def default_stages():
    widths = [32, 64, 160, 256]
    heads = [1, 2, 4, 8]
    reductions = [4, 4, 4, 1]
    kinds = ['conv', 'conv', 'transformer', 'transformer']
    return [StageConfig(kind, 2, c, h, r, i == 0)
            for i, (kind, c, h, r) in enumerate(
                zip(kinds, widths, heads, reductions))]


def parse_layout(layout):
    """
    Stage kinds from a layout string such as 'C-C-T-T' or 'CCTT'.

    Parameters
    ----------
    layout : str
        Layout string.
    """
    letters = layout.replace('-', '').strip().upper()
    if any(letter not in STAGE_KINDS for letter in letters):
        raise ConfigError("Layout '{}' may only contain C and T.".format(
            layout))
    return [STAGE_KINDS[letter] for letter in letters]


@dataclass
class ModelConfig(object):
    """
    Full architecture description.

    Parameters
    ----------
    stages : list
        Four StageConfigs.
    hsi_bands : int
        HSI input bands.
    x_bands : int
        X-modality input bands.
    num_classes : int
        Number of classes.
    conv_variant : str
        Convolution block variant: 'plain', 'with_se' or 'mbconv'.
    fem_ratio : int
        FEM bottleneck reduction r.
    fifm_regions : int
        FIFM region grid side s.
    fifm_topk : int
        FIFM routed regions k (default min(4, s^2)).
    decoder_width : int
        Decoder width.
    use_fem : bool
        Disable to pass branch features through unchanged.
    use_fifm : bool
        Disable to fuse by channel concat and a linear layer.
    seed : int
        Parameter initialization seed.
    """
    stages: list = field(default_factory=default_stages)
    hsi_bands: int = 144
    x_bands: int = 1
    num_classes: int = 15
    conv_variant: str = 'plain'
    fem_ratio: int = 8
    fifm_regions: int = 2
    fifm_topk: int = None
    decoder_width: int = 64
    use_fem: bool = True
    use_fifm: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.fifm_topk is None:
            self.fifm_topk = min(4, self.fifm_regions ** 2)

    @classmethod
    def toy(cls, hsi_bands=8, x_bands=2, num_classes=4, seed=0, **kwargs):
        """
        Small configuration for tests, gradient checks and overfit runs.

        Parameters
        ----------
        hsi_bands : int, optional (default 8)
            HSI bands.
        x_bands : int, optional (default 2)
            X bands.
        num_classes : int, optional (default 4)
            Classes.
        seed : int, optional (default 0)
            Initialization seed.
        kwargs : dict, optional
            Other ModelConfig fields.
        """
        widths = [8, 16, 16, 16]
        heads = [1, 2, 2, 2]
        reductions = [4, 4, 4, 1]
        kinds = ['conv', 'conv', 'transformer', 'transformer']
        stages = [StageConfig(kind, 1, c, h, r, i == 0)
                  for i, (kind, c, h, r) in enumerate(
                      zip(kinds, widths, heads, reductions))]
        kwargs.setdefault('decoder_width', 16)
        return cls(stages=stages, hsi_bands=hsi_bands, x_bands=x_bands,
                   num_classes=num_classes, seed=seed, **kwargs)

    @property
    def layout(self):
        return '-'.join(stage.letter for stage in self.stages)

    @property
    def stem_channels(self):
        return self.stages[0].channels

    def stage_strides(self):
        """Stride of each stage's entry (2 after a downsampling stage)."""
        strides = [1]
        for stage in self.stages[:-1]:
            strides.append(2 if stage.downsample_after else 1)
        return strides

    def validate(self):
        """
        Check every configuration rule, raising ConfigError naming the first
        violated one.
        """
        if len(self.stages) != NUM_STAGES:
            raise ConfigError('The encoder needs exactly {} stages, got '
                              '{}.'.format(NUM_STAGES, len(self.stages)))
        for i, stage in enumerate(self.stages, 1):
            if stage.kind not in STAGE_KINDS.values():
                raise ConfigError("stage{} kind must be 'conv' or "
                                  "'transformer', got '{}'.".format(
                                      i, stage.kind))
            if stage.depth < 1 or stage.channels < 1:
                raise ConfigError('stage{} depth and channels must be '
                                  'positive.'.format(i))
            if stage.kind == 'transformer':
                if stage.heads < 1 or stage.channels % stage.heads:
                    raise ConfigError(
                        'stage{} channels ({}) must be divisible by heads '
                        '({}).'.format(i, stage.channels, stage.heads))
                if stage.reduction < 1:
                    raise ConfigError('stage{} reduction must be positive.'
                                      .format(i))
            if (self.use_fem and self.fem_ratio > 0 and
                    (2 * stage.channels) % self.fem_ratio):
                raise ConfigError('fem_ratio {} must divide 2c = {} at '
                                  'stage{}.'.format(self.fem_ratio,
                                                    2 * stage.channels, i))
        if not LAYOUT_PATTERN.match(self.layout.replace('-', '')):
            raise ConfigError("Layout {} is invalid: convolution stages must "
                              "precede transformer stages.".format(self.layout))
        downsampled = [i for i, stage in enumerate(self.stages, 1)
                       if stage.downsample_after]
        if len(downsampled) > 1:
            raise ConfigError('At most one stage may downsample, got stages '
                              '{}.'.format(downsampled))
        if downsampled and downsampled[0] == NUM_STAGES:
            raise ConfigError('The last stage cannot downsample.')
        resolve_conv_block(self.conv_variant)
        if self.fem_ratio < 1:
            raise ConfigError('fem_ratio must be positive.')
        if self.fifm_regions < 1:
            raise ConfigError('fifm_regions must be positive.')
        if not 1 <= self.fifm_topk <= self.fifm_regions ** 2:
            raise ConfigError('fifm_topk must lie in [1, s^2 = {}], got '
                              '{}.'.format(self.fifm_regions ** 2,
                                           self.fifm_topk))
        if self.hsi_bands < 1 or self.x_bands < 1:
            raise ConfigError('Band counts must be positive.')
        if self.num_classes < 2:
            raise ConfigError('num_classes must be at least 2.')
        if self.decoder_width < 1:
            raise ConfigError('decoder_width must be positive.')
        return self

    def to_values(self):
        """Ordered key-value mapping with every field explicit."""
        downsampled = [i for i, stage in enumerate(self.stages, 1)
                       if stage.downsample_after]
        values = [
            ('layout', self.layout),
            ('channels', [s.channels for s in self.stages]),
            ('depths', [s.depth for s in self.stages]),
            ('heads', [s.heads for s in self.stages]),
            ('reductions', [s.reduction for s in self.stages]),
            ('downsample_after', downsampled[0] if downsampled else 0),
            ('hsi_bands', self.hsi_bands),
            ('x_bands', self.x_bands),
            ('num_classes', self.num_classes),
            ('conv_variant', self.conv_variant),
            ('fem_ratio', self.fem_ratio),
            ('fifm_regions', self.fifm_regions),
            ('fifm_topk', self.fifm_topk),
            ('decoder_width', self.decoder_width),
            ('use_fem', self.use_fem),
            ('use_fifm', self.use_fifm),
            ('seed', self.seed),
        ]
        return OrderedDict((key, format_value(value)) for key, value in values)

    def to_text(self):
        """Canonical key-value text."""
        return format_key_values(self.to_values())

    @classmethod
    def pop_values(cls, values):
        """
        Build a config from a parsed key-value mapping, removing the keys it
        uses. Absent keys take the defaults.

        Parameters
        ----------
        values : dict
            Parsed key-value pairs.
        """
        base = cls()
        stages = copy.deepcopy(base.stages)
        if 'layout' in values:
            kinds = parse_layout(values.pop('layout'))
            if len(kinds) != len(stages):
                raise ConfigError('Layout must name {} stages, got {}.'.format(
                    len(stages), len(kinds)))
            for stage, kind in zip(stages, kinds):
                stage.kind = kind
        for key, attr in [('channels', 'channels'), ('depths', 'depth'),
                          ('heads', 'heads'), ('reductions', 'reduction')]:
            if key in values:
                items = parse_list(values.pop(key), int, key)
                if len(items) != len(stages):
                    raise ConfigError('{} must list {} values, got {}.'.format(
                        key, len(stages), len(items)))
                for stage, item in zip(stages, items):
                    setattr(stage, attr, item)
        downsample = pop_typed(values, 'downsample_after', int, 1)
        if not 0 <= downsample <= len(stages):
            raise ConfigError('downsample_after must be a stage number or 0, '
                              'got {}.'.format(downsample))
        for i, stage in enumerate(stages, 1):
            stage.downsample_after = i == downsample
        kwargs = {'stages': stages}
        for f in dataclasses.fields(cls):
            if f.name == 'stages':
                continue
            kind = FIELD_TYPES.get(f.name, int)
            default = getattr(base, f.name) if f.name != 'fifm_topk' else None
            kwargs[f.name] = pop_typed(values, f.name, kind, default)
        return cls(**kwargs)

    @classmethod
    def from_text(cls, text, source='<text>'):
        """
        Parse canonical text; unknown keys are rejected.

        Parameters
        ----------
        text : str
            Key-value text.
        source : str, optional
            Name used in error messages.
        """
        values = parse_key_values(text, source)
        config = cls.pop_values(values)
        check_no_extra_keys(values, source)
        return config.validate()


def with_layout(config, layout):
    """
    Copy of a config with its stage kinds replaced.

    Parameters
    ----------
    config : ModelConfig
        Base config.
    layout : str
        Layout string such as 'C-C-C-T'.
    """
    kinds = parse_layout(layout)
    if len(kinds) != len(config.stages):
        raise ConfigError('Layout must name {} stages, got {}.'.format(
            len(config.stages), len(kinds)))
    stages = copy.deepcopy(config.stages)
    for stage, kind in zip(stages, kinds):
        stage.kind = kind
    return dataclasses.replace(config, stages=stages)


def with_conv_variant(config, variant):
    """
    Copy of a config using another convolution block variant.

    Parameters
    ----------
    config : ModelConfig
        Base config.
    variant : str
        'plain', 'with_se' or 'mbconv'.
    """
    resolve_conv_block(variant)
    return dataclasses.replace(config, stages=copy.deepcopy(config.stages),
                               conv_variant=variant)


def with_modules(config, fem=True, fifm=True):
    """
    Copy of a config with FEM and/or FIFM switched on or off.

    Parameters
    ----------
    config : ModelConfig
        Base config.
    fem : bool, optional (default True)
        Use FEM.
    fifm : bool, optional (default True)
        Use FIFM.
    """
    return dataclasses.replace(config, stages=copy.deepcopy(config.stages),
                               use_fem=fem, use_fifm=fifm)


def stage_resolutions(config, height, width):
    """
    Spatial size of every stage for a given input size.

    Parameters
    ----------
    config : ModelConfig
        Model config.
    height, width : int
        Input size.
    """
    sizes = []
    for stride in config.stage_strides():
        height, width = -(-height // stride), -(-width // stride)
        sizes.append((height, width))
    return sizes


def check_input_shape(config, height, width):
    """
    Reject input sizes that violate any divisibility constraint of the model:
    exact 2x downsampling, the FIFM region grid and transformer reduction
    ratios at every stage.

    Parameters
    ----------
    config : ModelConfig
        Model config.
    height, width : int
        Input size.
    """
    if height < 1 or width < 1:
        raise ShapeError('Input size must be positive, got {}x{}.'.format(
            height, width))
    h, w = height, width
    for i, (stage, stride) in enumerate(
            zip(config.stages, config.stage_strides()), 1):
        if h % stride or w % stride:
            raise DivisibilityError(
                'Input {}x{}: stage{} downsamples a {}x{} map by {}, which '
                'does not divide it.'.format(height, width, i, h, w, stride))
        h, w = h // stride, w // stride
        s = config.fifm_regions
        if config.use_fifm and (h % s or w % s):
            raise DivisibilityError(
                'Input {}x{}: stage{} map {}x{} is not divisible by the FIFM '
                'region grid {}.'.format(height, width, i, h, w, s))
        if stage.kind == 'transformer' and (h * w) % stage.reduction:
            raise DivisibilityError(
                'Input {}x{}: stage{} sequence length {} is not divisible by '
                'the reduction ratio {}.'.format(height, width, i, h * w,
                                                 stage.reduction))


class Branch(Module):
    """
    One modality's blocks for one stage, preceded by an embedding convolution
    when the stage changes width or resolution.

    Parameters
    ----------
    c_in : int or None
        Width of the previous stage; None for the first stage.
    stage : StageConfig
        Stage config.
    stride : int
        Stride of the embedding convolution.
    conv_block : type
        Convolution block class.
    rng : RandomState
        Random state for initialization.
    prefix : str, optional
        Dotted path.
    """
    def __init__(self, c_in, stage, stride, conv_block, rng, prefix=''):
        super(Branch, self).__init__(prefix)
        self.embed = None
        if c_in is not None:
            self.embed = self.add_module(
                'embed', Conv2d(c_in, stage.channels, rng, stride=stride,
                                prefix=self.child_prefix('embed')))
        self.blocks = []
        for j in range(stage.depth):
            name = 'block{}'.format(j)
            if stage.kind == 'transformer':
                block = TransformerBlock(stage.channels, stage.heads,
                                         stage.reduction, rng,
                                         self.child_prefix(name))
            else:
                block = conv_block(stage.channels, rng,
                                   self.child_prefix(name))
            self.blocks.append(self.add_module(name, block))

    def forward(self, x):
        if self.embed is not None:
            x = self.embed(x)
        for block in self.blocks:
            x = block(x)
        return x


class SegmentationNetwork(Module):
    """
    Two-branch encoder with cross-modal enhancement and fusion, followed by the
    All-MLP decoder.

    Parameters
    ----------
    config : ModelConfig
        Validated model config. Parameters are initialized from config.seed.
    """
    def __init__(self, config):
        super(SegmentationNetwork, self).__init__()
        self.config = config
        rng = np.random.RandomState(config.seed)
        conv_block = resolve_conv_block(config.conv_variant)
        c1 = config.stem_channels
        self.stem_hsi = self.add_module(
            'stem_hsi', Conv2d(config.hsi_bands, c1, rng, prefix='stem_hsi'))
        self.stem_x = self.add_module(
            'stem_x', Conv2d(config.x_bands, c1, rng, prefix='stem_x'))
        self.stages = []
        c_prev = None
        for i, (stage, stride) in enumerate(
                zip(config.stages, config.stage_strides()), 1):
            prefix = 'stage{}'.format(i)
            modules = {}
            for modality in ['hsi', 'x']:
                name = '{}.{}'.format(prefix, modality)
                modules[modality] = self.add_module(
                    name, Branch(c_prev, stage, stride, conv_block, rng, name))
            modules['fem'] = None
            if config.use_fem:
                name = '{}.fem'.format(prefix)
                modules['fem'] = self.add_module(
                    name, FEM(stage.channels, config.fem_ratio, rng, name))
            name = '{}.fifm'.format(prefix)
            if config.use_fifm:
                fusion = FIFM(stage.channels, config.fifm_regions,
                              config.fifm_topk, rng, prefix=name)
            else:
                fusion = ConcatFusion(stage.channels, rng, prefix=name)
            modules['fusion'] = self.add_module(name, fusion)
            self.stages.append(modules)
            c_prev = stage.channels
        self.decoder = self.add_module(
            'decoder', Decoder([s.channels for s in config.stages],
                               config.num_classes, rng,
                               width=config.decoder_width, prefix='decoder'))

    def check_inputs(self, hsi, x):
        """
        Validate band counts and spatial divisibility before any computation.

        Parameters
        ----------
        hsi : Tensor
            HSI input H x W x hsi_bands.
        x : Tensor
            X input H x W x x_bands.
        """
        if hsi.ndim != 3 or x.ndim != 3 or hsi.shape[:2] != x.shape[:2]:
            raise ShapeError('Inputs must be co-registered h x w x bands maps, '
                             'got {} and {}.'.format(hsi.shape, x.shape))
        if hsi.shape[2] != self.config.hsi_bands:
            raise ShapeError('HSI input has {} bands, the model expects '
                             '{}.'.format(hsi.shape[2], self.config.hsi_bands))
        if x.shape[2] != self.config.x_bands:
            raise ShapeError('X input has {} bands, the model expects '
                             '{}.'.format(x.shape[2], self.config.x_bands))
        check_input_shape(self.config, hsi.shape[0], hsi.shape[1])

    def stage_features(self, hsi, x):
        """
        Fused feature of every stage, in stage order.

        Parameters
        ----------
        hsi : Tensor
            HSI input H x W x hsi_bands.
        x : Tensor
            X input H x W x x_bands.
        """
        hsi, x = as_tensor(hsi), as_tensor(x)
        self.check_inputs(hsi, x)
        f_hsi, f_x = self.stem_hsi(hsi), self.stem_x(x)
        fused = []
        for modules in self.stages:
            f_hsi, f_x = modules['hsi'](f_hsi), modules['x'](f_x)
            if modules['fem'] is not None:
                f_hsi, f_x = modules['fem'](f_hsi, f_x)
            fused.append(modules['fusion'](f_hsi, f_x))
        return fused

    def forward(self, hsi, x):
        """
        Per-pixel class logits H x W x num_classes.

        Parameters
        ----------
        hsi : Tensor
            HSI input H x W x hsi_bands.
        x : Tensor
            X input H x W x x_bands.
        """
        hsi = as_tensor(hsi)
        fused = self.stage_features(hsi, x)
        return self.decoder(fused, hsi.shape[:2])


def build(config):
    """
    Validate a config and build its network.

    Parameters
    ----------
    config : ModelConfig
        Model config.
    """
    config.validate()
    return SegmentationNetwork(config)
