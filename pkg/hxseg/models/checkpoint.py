"""
Binary model checkpoints.

Layout (little-endian):

    b'LGCF'  u32 version
    u32 length, config text (utf-8)
    i32 best epoch, f64 best validation OA
    u32 record count, then per record (parameters, then running statistics):
        u32 name length, name (utf-8), u8 dtype tag (0 real32, 1 real64),
        u32 ndim, u32 dims..., raw values
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

from collections import OrderedDict
import struct

import numpy as np

from hxseg import ConfigError, ShapeError
from hxseg.models.network import build, ModelConfig

MAGIC = b'LGCF'
VERSION = 2
DTYPE_TAGS = {0: np.dtype('<f4'), 1: np.dtype('<f8')}


def _dtype_tag(dtype):
    for tag, value in DTYPE_TAGS.items():
        if np.dtype(dtype) == value.newbyteorder('='):
            return tag
    raise ValueError('Unsupported parameter dtype {}.'.format(dtype))


class Checkpoint(object):
    """
    Model config, parameter values, running normalization statistics and
    best-validation record.

    Parameters
    ----------
    config : ModelConfig
        Model config.
    params : OrderedDict
        Parameter and running-statistic values keyed by dotted name.
    best_epoch : int, optional (default -1)
        Epoch of the best validation OA; -1 if never evaluated.
    best_val_oa : float, optional (default 0.)
        Best validation OA.
    """
    def __init__(self, config, params, best_epoch=-1, best_val_oa=0.):
        self.config = config
        self.params = params
        self.best_epoch = best_epoch
        self.best_val_oa = best_val_oa

    @classmethod
    def from_model(cls, model, best_epoch=-1, best_val_oa=0.):
        """
        Snapshot a model's current parameter values and running statistics.

        Parameters
        ----------
        model : SegmentationNetwork
            Model.
        best_epoch : int, optional (default -1)
            Epoch of the best validation OA.
        best_val_oa : float, optional (default 0.)
            Best validation OA.
        """
        params = OrderedDict((name, param.data.copy()) for name, param in
                             model.named_state().items())
        return cls(model.config, params, best_epoch, best_val_oa)

    def load_into(self, model):
        """
        Copy parameter values and running statistics into a model built from
        the same config.

        Parameters
        ----------
        model : SegmentationNetwork
            Target model.
        """
        named = model.named_state()
        if set(named) != set(self.params):
            missing = sorted(set(named) - set(self.params))
            extra = sorted(set(self.params) - set(named))
            raise ConfigError('Checkpoint does not match the model: missing '
                              '{}, unexpected {}.'.format(missing, extra))
        for name, param in named.items():
            value = self.params[name]
            if value.shape != param.shape:
                raise ShapeError('State {} has shape {} in the checkpoint '
                                 'but {} in the model.'.format(
                                     name, value.shape, param.shape))
            param.data = value.astype(param.dtype, copy=True)
        return model

    def build_model(self):
        """Build the model described by the config and load the parameters."""
        model = build(self.config)
        return self.load_into(model)

    def to_bytes(self):
        """Serialized checkpoint."""
        text = self.config.to_text().encode('utf-8')
        chunks = [MAGIC, struct.pack('<I', VERSION),
                  struct.pack('<I', len(text)), text,
                  struct.pack('<id', self.best_epoch, self.best_val_oa),
                  struct.pack('<I', len(self.params))]
        for name, value in self.params.items():
            encoded = name.encode('utf-8')
            tag = _dtype_tag(value.dtype)
            chunks.append(struct.pack('<I', len(encoded)))
            chunks.append(encoded)
            chunks.append(struct.pack('<BI', tag, value.ndim))
            chunks.append(struct.pack('<{}I'.format(value.ndim), *value.shape))
            chunks.append(np.ascontiguousarray(
                value, dtype=DTYPE_TAGS[tag]).tobytes())
        return b''.join(chunks)

    def save(self, filename):
        """
        Write the checkpoint to a file.

        Parameters
        ----------
        filename : str
            Output filename.
        """
        with open(filename, 'wb') as f:
            f.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, data, source='<bytes>'):
        """
        Parse a serialized checkpoint.

        Parameters
        ----------
        data : bytes
            Serialized checkpoint.
        source : str, optional
            Name used in error messages.
        """
        reader = _Reader(data, source)
        if reader.take(4) != MAGIC:
            raise ValueError('{} is not a checkpoint (bad magic).'.format(
                source))
        version, = reader.unpack('<I')
        if version != VERSION:
            raise ValueError('{}: unsupported checkpoint version {}.'.format(
                source, version))
        length, = reader.unpack('<I')
        config = ModelConfig.from_text(reader.take(length).decode('utf-8'),
                                       source)
        best_epoch, best_val_oa = reader.unpack('<id')
        count, = reader.unpack('<I')
        params = OrderedDict()
        for _ in range(count):
            length, = reader.unpack('<I')
            name = reader.take(length).decode('utf-8')
            tag, ndim = reader.unpack('<BI')
            if tag not in DTYPE_TAGS:
                raise ValueError('{}: unknown dtype tag {} for {}.'.format(
                    source, tag, name))
            shape = reader.unpack('<{}I'.format(ndim))
            dtype = DTYPE_TAGS[tag]
            n_bytes = int(np.prod(shape)) * dtype.itemsize
            value = np.frombuffer(reader.take(n_bytes), dtype=dtype)
            params[name] = value.reshape(shape).astype(dtype.newbyteorder('='))
        if not reader.done():
            raise ValueError('{}: trailing bytes after the last record.'
                             .format(source))
        return cls(config, params, best_epoch, best_val_oa)

    @classmethod
    def load(cls, filename):
        """
        Read a checkpoint file.

        Parameters
        ----------
        filename : str
            Checkpoint filename.
        """
        with open(filename, 'rb') as f:
            data = f.read()
        return cls.from_bytes(data, filename)


class _Reader(object):
    """Sequential reader over a byte string."""
    def __init__(self, data, source):
        self.data, self.source, self.offset = data, source, 0

    def take(self, n):
        if self.offset + n > len(self.data):
            raise ValueError('{}: truncated checkpoint.'.format(self.source))
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def done(self):
        return self.offset == len(self.data)
