"""
Overlapping tile plans and logit stitching.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

import numpy as np


class TilePlan(object):
    """
    Square tiles covering an image.

    Parameters
    ----------
    height, width : int
        Image size.
    tile : int
        Tile side.
    stride : int
        Distance between consecutive origins (before edge clamping).
    origins : list
        (row, col) tile origins in row-major order.
    """
    def __init__(self, height, width, tile, stride, origins):
        self.height, self.width = height, width
        self.tile, self.stride = tile, stride
        self.origins = origins

    def __len__(self):
        return len(self.origins)

    def __iter__(self):
        return iter(self.origins)

    def window(self, origin):
        """
        Slices selecting a tile.

        Parameters
        ----------
        origin : tuple
            (row, col) origin.
        """
        row, col = origin
        return (slice(row, row + self.tile), slice(col, col + self.tile))

    def coverage(self):
        """Number of tiles covering each pixel."""
        counts = np.zeros((self.height, self.width), dtype=int)
        for origin in self.origins:
            counts[self.window(origin)] += 1
        return counts


def axis_origins(size, tile, stride):
    """
    Origins along one axis: multiples of stride plus a final origin clamped to
    size - tile.

    Parameters
    ----------
    size : int
        Axis length.
    tile : int
        Tile side.
    stride : int
        Step between origins.
    """
    origins = list(range(0, size - tile + 1, stride))
    if origins[-1] != size - tile:
        origins.append(size - tile)
    return origins


def plan_tiles(height, width, tile, overlap_ratio=0.5):
    """
    Plan overlapping tiles over an image.

    Parameters
    ----------
    height, width : int
        Image size.
    tile : int
        Tile side; must not exceed either image dimension.
    overlap_ratio : float, optional (default 0.5)
        Fraction of a tile shared with its neighbour, in [0, 1).
    """
    if tile < 1 or tile > min(height, width):
        raise ValueError('Tile size {} does not fit a {}x{} image.'.format(
            tile, height, width))
    if not 0 <= overlap_ratio < 1:
        raise ValueError('Overlap ratio must lie in [0, 1), got {}.'.format(
            overlap_ratio))
    stride = max(1, int(tile * (1 - overlap_ratio)))
    rows = axis_origins(height, tile, stride)
    cols = axis_origins(width, tile, stride)
    origins = [(r, c) for r in rows for c in cols]
    return TilePlan(height, width, tile, stride, origins)


def stitch(tiles, height, width):
    """
    Average overlapping tile logits into a full map.

    Tiles are accumulated in the order given.

    Parameters
    ----------
    tiles : list
        (origin, logits) pairs with logits of shape t x t x K.
    height, width : int
        Output size.
    """
    if not len(tiles):
        raise ValueError('No tiles to stitch.')
    n_classes = np.shape(tiles[0][1])[-1]
    total = np.zeros((height, width, n_classes))
    counts = np.zeros((height, width, 1))
    for (row, col), logits in tiles:
        logits = np.asarray(logits)
        t_h, t_w = logits.shape[:2]
        if row < 0 or col < 0 or row + t_h > height or col + t_w > width:
            raise ValueError('Tile at ({}, {}) exceeds the {}x{} map.'.format(
                row, col, height, width))
        total[row:row + t_h, col:col + t_w] += logits
        counts[row:row + t_h, col:col + t_w] += 1
    if np.any(counts == 0):
        r, c = np.argwhere(counts[..., 0] == 0)[0]
        raise ValueError('Pixel ({}, {}) is not covered by any tile.'.format(
            r, c))
    return total / counts
