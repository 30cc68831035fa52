"""
HDF5 prediction files: stitched logits, their argmax labels and the settings
that produced them.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

import h5py
import numpy as np

from hxseg import ShapeError

save_options = {'chunks': True,
                'fletcher32': True,
                'shuffle': True,
                'compression': 'gzip',
                'compression_opts': 1}


def dump_prediction(logits, filename, attrs=None, options=None):
    """
    Write h x w x classes logits and their argmax labels, replacing the file.

    Parameters
    ----------
    logits : array_like
        Stitched logits.
    filename : str
        Output filename.
    attrs : dict, optional
        File attributes (tile size, overlap, checkpoint). None values are
        stored as 'None'.
    options : dict, optional
        Keyword arguments to create_dataset.
    """
    logits = np.asarray(logits)
    if logits.ndim != 3:
        raise ShapeError('Logits must be h x w x classes, got shape {}.'.format(
            logits.shape))
    if options is None:
        options = save_options
    with h5py.File(filename, 'w') as f:
        f.create_dataset('logits', data=logits, **options)
        f.create_dataset('labels', data=logits.argmax(axis=-1).astype(np.int32),
                         **options)
        for key, value in (attrs or {}).items():
            f.attrs[key] = 'None' if value is None else value


def load_prediction(filename):
    """
    Read a prediction file. Returns (labels, logits, attrs); logits is None
    when the file only holds labels.

    Parameters
    ----------
    filename : str
        Filename.
    """
    with h5py.File(filename, 'r') as f:
        attrs = dict(f.attrs.items())
        logits = f['logits'][()] if 'logits' in f else None
        if 'labels' in f:
            labels = f['labels'][()]
        elif logits is not None:
            labels = logits.argmax(axis=-1)
        else:
            raise ValueError("'{}' holds neither logits nor labels.".format(
                filename))
    return labels, logits, attrs
