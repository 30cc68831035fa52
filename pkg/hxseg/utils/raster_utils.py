"""
Raster files and band-level preprocessing.

Raster file layout (little-endian): b'LGRS', u32 version, u32 height,
u32 width, u32 bands, then real32 values row-major with bands last.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

import struct

import numpy as np
import pandas as pd

from hxseg import ShapeError

MAGIC = b'LGRS'
VERSION = 1
_HEADER = struct.Struct('<4sIIII')


def write_raster(data, filename):
    """
    Write an h x w x bands (or h x w) array as a raster file.

    Parameters
    ----------
    data : array_like
        Raster values; stored as real32.
    filename : str
        Output filename.
    """
    data = np.asarray(data)
    if data.ndim == 2:
        data = data[..., None]
    if data.ndim != 3:
        raise ShapeError('Rasters are h x w x bands, got shape {}.'.format(
            data.shape))
    header = _HEADER.pack(MAGIC, VERSION, *data.shape)
    with open(filename, 'wb') as f:
        f.write(header)
        f.write(np.ascontiguousarray(data, dtype='<f4').tobytes())


def read_raster(filename):
    """
    Read a raster file as an h x w x bands real32 array.

    Parameters
    ----------
    filename : str
        Raster filename.
    """
    with open(filename, 'rb') as f:
        data = f.read()
    if len(data) < _HEADER.size:
        raise ValueError("'{}' is too short to be a raster.".format(filename))
    magic, version, height, width, bands = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError("'{}' is not a raster (bad magic).".format(filename))
    if version != VERSION:
        raise ValueError("'{}': unsupported raster version {}.".format(
            filename, version))
    count = height * width * bands
    if len(data) != _HEADER.size + 4 * count:
        raise ValueError("'{}': expected {} values for a {}x{}x{} raster."
                         .format(filename, count, height, width, bands))
    values = np.frombuffer(data, dtype='<f4', offset=_HEADER.size)
    values = values.reshape(height, width, bands).astype(np.float32)
    if not np.all(np.isfinite(values)):
        raise ValueError("'{}' contains non-finite values.".format(filename))
    return values


def normalize(data):
    """
    Per-band min-max scaling to [0, 1]; constant bands map to zeros.

    Parameters
    ----------
    data : ndarray
        Raster h x w x bands.
    """
    data = np.asarray(data, dtype=np.float32)
    low = data.min(axis=(0, 1), keepdims=True)
    span = data.max(axis=(0, 1), keepdims=True) - low
    safe = np.where(span > 0, span, 1)
    return np.where(span > 0, (data - low) / safe, 0).astype(np.float32)


def band_arithmetic(data, expressions):
    """
    Derive bands from arithmetic expressions over the input bands.

    Bands are named b0, b1, ... For example 'b0 - b1' turns a DSM / DEM pair
    into a normalized DSM.

    Parameters
    ----------
    data : ndarray
        Raster h x w x bands.
    expressions : str or list
        One expression per output band; a string is split on ';'.
    """
    if isinstance(expressions, str):
        expressions = [e.strip() for e in expressions.split(';') if e.strip()]
    h, w = data.shape[:2]
    bands = dict(('b{}'.format(i), data[..., i].astype(np.float64).ravel())
                 for i in range(data.shape[-1]))
    derived = []
    for expression in expressions:
        try:
            value = pd.eval(expression, local_dict=bands, engine='python')
        except (NameError, SyntaxError) as e:
            raise ValueError("Bad band expression '{}': {}".format(
                expression, e))
        value = np.broadcast_to(np.asarray(value, dtype=np.float64), (h * w,))
        derived.append(value.reshape(h, w))
    return np.stack(derived, axis=-1).astype(np.float32)


def resample_nearest(data, height, width):
    """
    Nearest-neighbour resampling to a new spatial size.

    Parameters
    ----------
    data : ndarray
        Raster h x w x bands.
    height, width : int
        Target size.
    """
    h, w = data.shape[:2]
    rows = np.minimum((np.arange(height) + 0.5) * h / height, h - 1)
    cols = np.minimum((np.arange(width) + 0.5) * w / width, w - 1)
    return data[rows.astype(int)][:, cols.astype(int)]
