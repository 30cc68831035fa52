"""
Dataset preparation utilities.

A dataset is described by a manifest: a key-value file naming co-registered
HSI, X and label rasters plus band counts, class count, ignore label, palette
and train/test regions. Relative paths are resolved against the manifest's
directory.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

from collections import namedtuple, OrderedDict
import dataclasses
from dataclasses import dataclass
import logging
import os
import warnings

import numpy as np
from scipy.spatial import cKDTree

from hxseg import ConfigError, ShapeError
from hxseg.utils import (check_no_extra_keys, format_key_values,
                         pop_typed, read_key_values, write_text)
from hxseg.utils.image_utils import (default_palette, read_palette,
                                     write_palette)
from hxseg.utils.raster_utils import (band_arithmetic, normalize, read_raster,
                                      resample_nearest, write_raster)
from hxseg.utils.tile_utils import plan_tiles

logger = logging.getLogger(__name__)

RESAMPLE_MODES = ('none', 'nearest')
PATH_KEYS = ('hsi_path', 'x_path', 'label_path', 'palette_path')
MASK_PREFIX = 'mask:'

Tile = namedtuple('Tile', ['origin', 'hsi', 'x', 'labels'])


@dataclass
class DatasetManifest(object):
    """
    Paired rasters and labelling conventions of one scene.

    Parameters
    ----------
    hsi_path : str
        HSI raster.
    x_path : str
        X-modality raster (LiDAR, SAR, DSM, ...).
    label_path : str, optional
        Label raster (one band of integer values); optional for prediction.
    hsi_bands : int
        HSI band count.
    x_bands : int
        X band count after band arithmetic.
    num_classes : int
        Number of classes.
    ignore_label : int
        Label of unlabeled pixels; excluded from loss and metrics.
    palette_path : str, optional
        'class_id,R,G,B' palette; a default palette is used when absent.
    x_expression : str, optional
        Band arithmetic applied to the X raster, e.g. 'b0 - b1'.
    x_resample : str
        'nearest' resamples the X raster to the HSI size; 'none' requires
        matching sizes.
    train_region, test_region : str, optional
        Rectangles 'r0,c0,r1,c1;...' (half-open) or 'mask:<raster path>'.
        Absent regions select every labeled pixel.
    """
    hsi_path: str = None
    x_path: str = None
    label_path: str = None
    hsi_bands: int = 0
    x_bands: int = 0
    num_classes: int = 0
    ignore_label: int = -1
    palette_path: str = None
    x_expression: str = None
    x_resample: str = 'none'
    train_region: str = None
    test_region: str = None

    def validate(self):
        """Raise ConfigError naming the first violated rule."""
        if not self.hsi_path or not self.x_path:
            raise ConfigError('Manifest must name hsi_path and x_path.')
        if self.hsi_bands < 1 or self.x_bands < 1:
            raise ConfigError('hsi_bands and x_bands must be positive.')
        if self.num_classes < 2:
            raise ConfigError('num_classes must be at least 2.')
        if 0 <= self.ignore_label < self.num_classes:
            raise ConfigError('ignore_label {} collides with a class id.'.format(
                self.ignore_label))
        if self.x_resample not in RESAMPLE_MODES:
            raise ConfigError("x_resample must be one of {}, got '{}'.".format(
                ', '.join(RESAMPLE_MODES), self.x_resample))
        return self


def read_manifest(filename):
    """
    Read and validate a manifest file.

    Parameters
    ----------
    filename : str
        Manifest filename.
    """
    values = read_key_values(filename)
    base = os.path.dirname(os.path.abspath(filename))
    kwargs = {}
    for f in dataclasses.fields(DatasetManifest):
        value = pop_typed(values, f.name, f.type, f.default)
        if f.type is str and value is not None and value.lower() == 'none':
            value = None
        kwargs[f.name] = value
    check_no_extra_keys(values, filename)
    for key in PATH_KEYS:
        kwargs[key] = resolve_path(kwargs[key], base)
    for key in ['train_region', 'test_region']:
        region = kwargs[key]
        if region is not None and region.startswith(MASK_PREFIX):
            kwargs[key] = MASK_PREFIX + resolve_path(
                region[len(MASK_PREFIX):].strip(), base)
    return DatasetManifest(**kwargs).validate()


def resolve_path(path, base):
    """
    Resolve a manifest path against the manifest directory.

    Parameters
    ----------
    path : str or None
        Path as written; None and 'none' pass through as None.
    base : str
        Manifest directory.
    """
    if path is None or path.lower() == 'none':
        return None
    return os.path.normpath(os.path.join(base, path))


def write_manifest(manifest, filename):
    """
    Write a manifest with paths relative to its own directory.

    Parameters
    ----------
    manifest : DatasetManifest
        Manifest.
    filename : str
        Output filename.
    """
    base = os.path.dirname(os.path.abspath(filename))
    values = OrderedDict()
    for f in dataclasses.fields(manifest):
        key, value = f.name, getattr(manifest, f.name)
        if value is None:
            continue
        if key in PATH_KEYS:
            value = os.path.relpath(value, base)
        values[key] = value
    write_text(format_key_values(values), filename)


class Scene(object):
    """
    A loaded, normalized scene.

    Parameters
    ----------
    manifest : DatasetManifest
        Source manifest.
    hsi : ndarray
        HSI h x w x hsi_bands in [0, 1].
    x : ndarray
        X h x w x x_bands in [0, 1].
    labels : ndarray or None
        Integer labels h x w.
    palette : dict
        Class id to RGB triple.
    """
    def __init__(self, manifest, hsi, x, labels, palette):
        self.manifest = manifest
        self.hsi = hsi
        self.x = x
        self.labels = labels
        self.palette = palette

    @property
    def shape(self):
        return self.hsi.shape[:2]

    def split(self, which):
        """
        Labels restricted to the 'train' or 'test' region.

        Parameters
        ----------
        which : str
            'train' or 'test'.
        """
        if which not in ('train', 'test'):
            raise ValueError("Split must be 'train' or 'test', got '{}'."
                             .format(which))
        if self.labels is None:
            raise ValueError('Scene has no labels.')
        region = getattr(self.manifest, '{}_region'.format(which))
        mask = region_mask(region, self.shape)
        labels = apply_split(self.labels, mask, self.manifest.ignore_label)
        if not np.any(labels != self.manifest.ignore_label):
            warnings.warn('The {} split has no labeled pixels.'.format(which))
        return labels


def load_scene(manifest):
    """
    Load, check and normalize the rasters of a manifest.

    Parameters
    ----------
    manifest : DatasetManifest
        Manifest.
    """
    manifest.validate()
    hsi = read_raster(manifest.hsi_path)
    x = read_raster(manifest.x_path)
    if manifest.x_expression:
        x = band_arithmetic(x, manifest.x_expression)
    if x.shape[:2] != hsi.shape[:2]:
        if manifest.x_resample != 'nearest':
            raise ShapeError('HSI is {}x{} but X is {}x{}; set x_resample = '
                             'nearest to resample.'.format(
                                 hsi.shape[0], hsi.shape[1],
                                 x.shape[0], x.shape[1]))
        logger.info('Resampling X from %dx%d to %dx%d', x.shape[0],
                    x.shape[1], hsi.shape[0], hsi.shape[1])
        x = resample_nearest(x, hsi.shape[0], hsi.shape[1])
    if hsi.shape[2] != manifest.hsi_bands:
        raise ShapeError("'{}' has {} bands, the manifest says {}.".format(
            manifest.hsi_path, hsi.shape[2], manifest.hsi_bands))
    if x.shape[2] != manifest.x_bands:
        raise ShapeError("X has {} bands, the manifest says {}.".format(
            x.shape[2], manifest.x_bands))
    labels = None
    if manifest.label_path is not None:
        labels = read_labels(manifest.label_path)
        if labels.shape != hsi.shape[:2]:
            raise ShapeError("Labels are {}x{} but the rasters are {}x{}."
                             .format(labels.shape[0], labels.shape[1],
                                     hsi.shape[0], hsi.shape[1]))
        check_labels(labels, manifest.num_classes, manifest.ignore_label)
    if manifest.palette_path is not None:
        palette = read_palette(manifest.palette_path)
    else:
        palette = default_palette(manifest.num_classes)
    return Scene(manifest, normalize(hsi), normalize(x), labels, palette)


def read_labels(filename):
    """
    Read a single-band label raster as integers.

    Parameters
    ----------
    filename : str
        Label raster filename.
    """
    data = read_raster(filename)
    if data.shape[2] != 1:
        raise ShapeError("'{}': label rasters have one band, got {}.".format(
            filename, data.shape[2]))
    labels = np.rint(data[..., 0])
    if not np.array_equal(labels, data[..., 0]):
        raise ValueError("'{}': labels must be integers.".format(filename))
    return labels.astype(np.int64)


def check_labels(labels, num_classes, ignore):
    """
    Check every label is a class id or the ignore label.

    Parameters
    ----------
    labels : ndarray
        Integer labels.
    num_classes : int
        Number of classes.
    ignore : int
        Ignore label.
    """
    bad = (labels != ignore) & ((labels < 0) | (labels >= num_classes))
    if np.any(bad):
        row, col = np.argwhere(bad)[0]
        raise ValueError('Label {} at ({}, {}) is outside [0, {}) and is not '
                         'the ignore label {}.'.format(
                             labels[row, col], row, col, num_classes, ignore))


def region_mask(region, shape):
    """
    Boolean mask of a region description.

    Parameters
    ----------
    region : str or None
        'r0,c0,r1,c1;...' half-open rectangles, 'mask:<raster path>' (nonzero
        pixels selected) or None for the whole image.
    shape : tuple
        Image (height, width).
    """
    if region is None or region.strip().lower() in ('', 'none', 'all'):
        return np.ones(shape, dtype=bool)
    region = region.strip()
    if region.startswith(MASK_PREFIX):
        data = read_raster(region[len(MASK_PREFIX):].strip())
        if data.shape[:2] != tuple(shape):
            raise ShapeError('Mask is {}x{}, expected {}x{}.'.format(
                data.shape[0], data.shape[1], shape[0], shape[1]))
        return np.any(data != 0, axis=2)
    mask = np.zeros(shape, dtype=bool)
    for rect in region.split(';'):
        if not rect.strip():
            continue
        try:
            r0, c0, r1, c1 = [int(v) for v in rect.split(',')]
        except ValueError:
            raise ConfigError("Bad rectangle '{}'; expected r0,c0,r1,c1."
                              .format(rect.strip()))
        if not (0 <= r0 < r1 <= shape[0] and 0 <= c0 < c1 <= shape[1]):
            raise ConfigError('Rectangle {} does not fit a {}x{} image.'
                              .format((r0, c0, r1, c1), shape[0], shape[1]))
        mask[r0:r1, c0:c1] = True
    return mask


def apply_split(labels, mask, ignore=-1):
    """
    Set labels outside a mask to the ignore label.

    Parameters
    ----------
    labels : ndarray
        Integer labels.
    mask : ndarray
        Boolean selection.
    ignore : int, optional (default -1)
        Ignore label.
    """
    return np.where(mask, labels, ignore)


def synth_scene(seed, size, hsi_bands, x_bands, classes, noise=0.05,
                n_cells=None):
    """
    Generate a synthetic HSI-X scene with Voronoi class regions.

    Every class owns at least one cell and emits a class signature in both
    modalities plus Gaussian noise. Returns (hsi, x, labels).

    Parameters
    ----------
    seed : int
        Random seed.
    size : int or tuple
        Side length or (height, width).
    hsi_bands : int
        HSI band count.
    x_bands : int
        X band count.
    classes : int
        Number of classes (at least 2).
    noise : float, optional (default 0.05)
        Noise standard deviation.
    n_cells : int, optional
        Voronoi cells (default 2 * classes).
    """
    if classes < 2:
        raise ValueError('Scenes need at least 2 classes, got {}.'.format(
            classes))
    height, width = (size, size) if np.isscalar(size) else size
    if n_cells is None:
        n_cells = 2 * classes
    if n_cells < classes or n_cells > height * width:
        raise ValueError('Cannot place {} cells for {} classes in a {}x{} '
                         'scene.'.format(n_cells, classes, height, width))
    rng = np.random.RandomState(seed)
    sites = rng.choice(height * width, size=n_cells, replace=False)
    sites = np.column_stack(np.unravel_index(sites, (height, width)))
    cell_class = np.concatenate([rng.permutation(classes),
                                 rng.randint(classes,
                                             size=n_cells - classes)])
    grid = np.indices((height, width)).reshape(2, -1).T
    _, nearest = cKDTree(sites).query(grid)
    labels = cell_class[nearest].reshape(height, width).astype(np.int64)
    hsi_signatures = rng.uniform(size=(classes, hsi_bands))
    x_signatures = rng.uniform(size=(classes, x_bands))
    hsi = hsi_signatures[labels] + noise * rng.randn(height, width, hsi_bands)
    x = x_signatures[labels] + noise * rng.randn(height, width, x_bands)
    return hsi.astype(np.float32), x.astype(np.float32), labels


def write_synth_scene(directory, seed=0, size=64, hsi_bands=8, x_bands=2,
                      classes=4, noise=0.05, train_region=None,
                      test_region=None):
    """
    Write a synthetic scene and its manifest; returns the manifest filename.

    Parameters
    ----------
    directory : str
        Output directory (created if missing).
    seed, size, hsi_bands, x_bands, classes, noise
        Passed to synth_scene.
    train_region, test_region : str, optional
        Region descriptions written to the manifest.
    """
    if not os.path.isdir(directory):
        os.makedirs(directory)
    hsi, x, labels = synth_scene(seed, size, hsi_bands, x_bands, classes,
                                 noise)
    paths = dict((name, os.path.join(directory, name)) for name in
                 ['hsi.lgrs', 'x.lgrs', 'labels.lgrs', 'palette.csv'])
    write_raster(hsi, paths['hsi.lgrs'])
    write_raster(x, paths['x.lgrs'])
    write_raster(labels.astype(np.float32), paths['labels.lgrs'])
    write_palette(default_palette(classes), paths['palette.csv'])
    manifest = DatasetManifest(
        hsi_path=paths['hsi.lgrs'], x_path=paths['x.lgrs'],
        label_path=paths['labels.lgrs'], hsi_bands=hsi_bands,
        x_bands=x_bands, num_classes=classes,
        palette_path=paths['palette.csv'], train_region=train_region,
        test_region=test_region).validate()
    filename = os.path.join(directory, 'manifest.txt')
    write_manifest(manifest, filename)
    return filename


def subsample_train(labels, fraction, seed, ignore=-1):
    """
    Keep a seeded uniform random fraction of every class's labeled pixels.

    Each class keeps round(fraction * count) pixels, halves rounded up;
    dropped pixels become the ignore label.

    Parameters
    ----------
    labels : ndarray
        Integer labels.
    fraction : float
        Retained fraction in (0, 1].
    seed : int
        Random seed.
    ignore : int, optional (default -1)
        Ignore label.
    """
    if not 0 < fraction <= 1:
        raise ValueError('Training fraction must lie in (0, 1], got {}.'
                         .format(fraction))
    labels = np.asarray(labels)
    rng = np.random.RandomState(seed)
    kept = np.full(labels.shape, ignore, dtype=labels.dtype)
    for class_id in np.unique(labels[labels != ignore]):
        where = np.flatnonzero(labels == class_id)
        keep = int(np.floor(fraction * len(where) + 0.5))
        if keep == 0:
            warnings.warn('Class {} loses all {} training pixels at fraction '
                          '{}.'.format(class_id, len(where), fraction))
            continue
        kept.flat[rng.permutation(where)[:keep]] = class_id
    return kept


def build_tile_dataset(hsi, x, labels, tile, overlap_ratio=0.5, ignore=-1):
    """
    Cut co-registered tiles; tiles without labeled pixels are dropped.

    Parameters
    ----------
    hsi : ndarray
        HSI h x w x bands.
    x : ndarray
        X h x w x bands.
    labels : ndarray
        Integer labels h x w.
    tile : int
        Tile side.
    overlap_ratio : float, optional (default 0.5)
        Overlap between neighbouring tiles.
    ignore : int, optional (default -1)
        Ignore label.
    """
    if hsi.shape[:2] != x.shape[:2] or hsi.shape[:2] != labels.shape:
        raise ShapeError('Rasters {}, {} and labels {} are not co-registered.'
                         .format(hsi.shape, x.shape, labels.shape))
    plan = plan_tiles(hsi.shape[0], hsi.shape[1], tile, overlap_ratio)
    tiles = []
    for origin in plan:
        window = plan.window(origin)
        if np.all(labels[window] == ignore):
            continue
        tiles.append(Tile(origin, hsi[window], x[window], labels[window]))
    logger.info('Cut %d of %d tiles with labeled pixels', len(tiles),
                len(plan))
    return tiles


def split_validation(tiles, fraction=0.1, seed=0):
    """
    Hold out a seeded fraction of tiles for checkpoint selection.

    Returns (train, validation) lists, each in the original order. At least
    one tile is held out when fraction > 0 and more than one tile exists.

    Parameters
    ----------
    tiles : list
        Tiles.
    fraction : float, optional (default 0.1)
        Held-out fraction in [0, 1).
    seed : int, optional (default 0)
        Random seed.
    """
    if not 0 <= fraction < 1:
        raise ValueError('Validation fraction must lie in [0, 1), got {}.'
                         .format(fraction))
    n_val = int(np.floor(fraction * len(tiles) + 0.5))
    if fraction > 0 and len(tiles) > 1:
        n_val = min(max(n_val, 1), len(tiles) - 1)
    else:
        n_val = 0
    held = set(np.random.RandomState(seed).permutation(len(tiles))[:n_val])
    train = [t for i, t in enumerate(tiles) if i not in held]
    val = [t for i, t in enumerate(tiles) if i in held]
    return train, val
