#!/usr/bin/env python
"""
Predict a full-scene classification map with a trained checkpoint.

The scene is cut into overlapping tiles, every tile is forwarded, the logits
are averaged back into a full map and the argmax is rendered with the
manifest's palette. Stitched logits are written to HDF5.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

import argparse
import logging
import os

from hxseg import DivisibilityError, ShapeError
from hxseg.models.checkpoint import Checkpoint
from hxseg.models.network import check_input_shape
from hxseg.scripts import configure, global_parser, HelpFormatter
from hxseg.training import predict_scene
from hxseg.utils import h5_utils
from hxseg.utils.dataset_utils import load_scene, read_manifest
from hxseg.utils.image_utils import render_map

logger = logging.getLogger(__name__)

DEFAULT_TILE = 128


def add_arguments(parser):
    """
    Add predict arguments to a parser.

    Parameters
    ----------
    parser : ArgumentParser
        Parser.
    """
    parser.add_argument('checkpoint',
                        help='Trained checkpoint.')
    parser.add_argument('manifest',
                        help='Scene manifest.')
    parser.add_argument('-o', '--out', default='map.ppm',
                        help='Output map (PPM).')
    parser.add_argument('--logits',
                        help='Output logits (HDF5; default: map name with '
                             '.h5).')
    parser.add_argument('--tile', type=int,
                        help='Tile side (default: largest valid size up to '
                             '{}).'.format(DEFAULT_TILE))
    parser.add_argument('--overlap', type=float, default=0.5,
                        help='Tile overlap ratio.')


def parse_args(input_args=None):
    """
    Parse command-line arguments.

    Parameters
    ----------
    input_args : list, optional
        Input arguments. If not provided, defaults to sys.argv[1:].
    """
    parser = argparse.ArgumentParser(parents=[global_parser()],
                                     formatter_class=HelpFormatter)
    add_arguments(parser)
    return parser.parse_args(input_args)


def largest_valid_tile(config, limit):
    """
    Largest tile side up to limit accepted by the model.

    Parameters
    ----------
    config : ModelConfig
        Model config.
    limit : int
        Upper bound (usually the smaller scene dimension).
    """
    for tile in range(limit, 0, -1):
        try:
            check_input_shape(config, tile, tile)
        except DivisibilityError:
            continue
        return tile
    raise DivisibilityError('No tile size up to {} suits the model.'.format(
        limit))


def check_bands(config, manifest):
    """
    Reject scenes whose band counts differ from the model's.

    Parameters
    ----------
    config : ModelConfig
        Model config.
    manifest : DatasetManifest
        Scene manifest.
    """
    for name in ['hsi_bands', 'x_bands']:
        ours, theirs = getattr(config, name), getattr(manifest, name)
        if ours != theirs:
            raise ShapeError('Band mismatch: the checkpoint expects {} = {} '
                             'but the manifest has {}.'.format(
                                 name, ours, theirs))


def main(checkpoint_filename, manifest_filename, map_filename,
         logits_filename=None, tile=None, overlap=0.5, threads=1):
    """
    Predict, stitch, render and dump logits. Returns the predicted labels.

    Parameters
    ----------
    checkpoint_filename : str
        Trained checkpoint.
    manifest_filename : str
        Scene manifest.
    map_filename : str
        Output map.
    logits_filename : str, optional
        Output logits (default: map name with .h5).
    tile : int, optional
        Tile side.
    overlap : float, optional (default 0.5)
        Tile overlap ratio.
    threads : int, optional (default 1)
        Tiles forwarded concurrently.
    """
    checkpoint = Checkpoint.load(checkpoint_filename)
    manifest = read_manifest(manifest_filename)
    check_bands(checkpoint.config, manifest)
    if tile is not None:
        check_input_shape(checkpoint.config, tile, tile)
    scene = load_scene(manifest)
    if tile is None:
        tile = largest_valid_tile(checkpoint.config,
                                  min(DEFAULT_TILE, min(scene.shape)))
    model = checkpoint.build_model()
    logits = predict_scene(model, scene.hsi, scene.x, tile, overlap, threads)
    labels = logits.argmax(axis=-1)
    render_map(labels, scene.palette, map_filename, manifest.ignore_label)
    if logits_filename is None:
        logits_filename = os.path.splitext(map_filename)[0] + '.h5'
    h5_utils.dump_prediction(logits, logits_filename,
                             attrs={'tile': tile, 'overlap': overlap,
                                    'checkpoint': checkpoint_filename})
    logger.info('Wrote %s and %s', map_filename, logits_filename)
    return labels

if __name__ == '__main__':
    args = parse_args()
    configure(args.precision, args.quiet)
    main(args.checkpoint, args.manifest, args.out, args.logits, args.tile,
         args.overlap, args.threads)
