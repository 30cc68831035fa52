"""
Classification-map images and class palettes.

Maps are written as binary PPM (lossless, no timestamps), one palette colour
per class and black for ignored pixels.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

from collections import OrderedDict
import io

import numpy as np
import pandas as pd
from PIL import Image

BLACK = (0, 0, 0)

# first colours of default_palette; further classes get seeded random colours
BASE_COLOURS = [
    (0, 128, 0), (255, 0, 0), (0, 0, 255), (255, 255, 0), (0, 255, 255),
    (255, 0, 255), (128, 0, 0), (0, 0, 128), (128, 128, 0), (128, 0, 128),
    (0, 128, 128), (255, 128, 0), (128, 255, 0), (192, 192, 192),
    (128, 128, 255)]


def load(string):
    """
    Load an image from a file or binary string.

    Parameters
    ----------
    string : str or bytes
        Filename or binary string.
    """
    if isinstance(string, bytes):
        return Image.open(io.BytesIO(string))
    return Image.open(string)


def get_pixels(image, mode=None):
    """
    Extract pixels from an image, possibly after converting to the given
    mode.

    Parameters
    ----------
    image : PIL Image
        Image.
    mode : str, optional
        Image mode. For example, 'RGB' or 'P' (8-bit).
    """
    if mode is not None and image.mode != mode:
        image = image.convert(mode)
    pixels = np.asarray(image)
    return pixels


def default_palette(num_classes, seed=0):
    """
    Distinct non-black colours for every class.

    Parameters
    ----------
    num_classes : int
        Number of classes.
    seed : int, optional (default 0)
        Seed for colours beyond the base table.
    """
    palette = OrderedDict()
    used = set([BLACK])
    rng = np.random.RandomState(seed)
    for i in range(num_classes):
        if i < len(BASE_COLOURS):
            colour = BASE_COLOURS[i]
        else:
            colour = BLACK
            while colour in used:
                colour = tuple(int(v) for v in rng.randint(0, 256, size=3))
        used.add(colour)
        palette[i] = colour
    return palette


def check_palette(palette, source='palette'):
    """
    Reject palettes that give a class the ignore colour (black), which would
    make the class unreadable from a rendered map.

    Parameters
    ----------
    palette : dict
        Class id to RGB triple.
    source : str, optional
        Name used in error messages.
    """
    black = [class_id for class_id, colour in palette.items()
             if tuple(int(v) for v in colour) == BLACK]
    if black:
        raise ValueError("{}: black is reserved for ignored pixels, got it "
                         "for class(es) {}.".format(source, sorted(black)))
    return palette


def read_palette(filename):
    """
    Read a palette file with 'class_id,R,G,B' lines. Black is rejected.

    Parameters
    ----------
    filename : str
        Palette filename.
    """
    df = pd.read_csv(filename, header=None, comment='#',
                     names=['class_id', 'r', 'g', 'b'], skipinitialspace=True)
    if df.isnull().values.any():
        raise ValueError("'{}': every line needs class_id,R,G,B.".format(
            filename))
    if df['class_id'].duplicated().any():
        raise ValueError("'{}': duplicate class ids.".format(filename))
    channels = df[['r', 'g', 'b']].values
    if np.any(channels < 0) or np.any(channels > 255):
        raise ValueError("'{}': colour values must lie in [0, 255].".format(
            filename))
    palette = OrderedDict()
    for class_id, r, g, b in df.astype(int).itertuples(index=False):
        palette[int(class_id)] = (int(r), int(g), int(b))
    return check_palette(palette, "'{}'".format(filename))


def write_palette(palette, filename):
    """
    Write a palette as 'class_id,R,G,B' lines.

    Parameters
    ----------
    palette : dict
        Class id to RGB triple.
    filename : str
        Output filename.
    """
    rows = [(k,) + tuple(v) for k, v in sorted(palette.items())]
    df = pd.DataFrame(rows, columns=['class_id', 'r', 'g', 'b'])
    df.to_csv(filename, header=False, index=False)


def colourize(labels, palette, ignore=-1):
    """
    Map labels to an h x w x 3 uint8 image array.

    Parameters
    ----------
    labels : array_like
        Integer label map.
    palette : dict
        Class id to RGB triple.
    ignore : int, optional (default -1)
        Label rendered black.
    """
    check_palette(palette)
    labels = np.asarray(labels)
    missing = set(np.unique(labels)) - set(palette) - set([ignore])
    if missing:
        raise ValueError('No palette entry for class(es) {}.'.format(
            sorted(int(m) for m in missing)))
    pixels = np.zeros(labels.shape + (3,), dtype=np.uint8)
    for class_id, colour in palette.items():
        pixels[labels == class_id] = colour
    pixels[labels == ignore] = BLACK
    return pixels


def render_map(labels, palette, filename, ignore=-1):
    """
    Render a label map as a PPM image.

    Parameters
    ----------
    labels : array_like
        Integer label map.
    palette : dict
        Class id to RGB triple.
    filename : str
        Output filename.
    ignore : int, optional (default -1)
        Label rendered black.
    """
    pixels = colourize(labels, palette, ignore)
    Image.fromarray(pixels).save(filename, format='PPM')


def read_map(filename, palette, ignore=-1):
    """
    Parse a rendered map back into labels.

    Black pixels are ignored; palettes may not use black.

    Parameters
    ----------
    filename : str
        Image filename.
    palette : dict
        Class id to RGB triple; must be injective and free of black.
    ignore : int, optional (default -1)
        Label for black pixels.
    """
    check_palette(palette)
    pixels = get_pixels(load(filename), mode='RGB').astype(np.int64)
    codes = (pixels[..., 0] << 16) | (pixels[..., 1] << 8) | pixels[..., 2]
    labels = np.full(codes.shape, ignore, dtype=np.int64)
    known = np.zeros(codes.shape, dtype=bool)
    for class_id, (r, g, b) in palette.items():
        mask = codes == ((r << 16) | (g << 8) | b)
        labels[mask] = class_id
        known |= mask
    unknown = ~known & (codes != 0)
    if np.any(unknown):
        row, col = np.argwhere(unknown)[0]
        raise ValueError("'{}': pixel ({}, {}) has no palette class.".format(
            filename, row, col))
    return labels
