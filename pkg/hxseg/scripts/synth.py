#!/usr/bin/env python
"""
Write a seeded synthetic HSI-X scene, its manifest and a matching run config
for the toy model.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

import argparse
from collections import OrderedDict
import logging
import os

from hxseg.models.network import ModelConfig
from hxseg.scripts import configure, global_parser, HelpFormatter
from hxseg.training import TrainConfig
from hxseg.utils import format_key_values, write_text
from hxseg.utils.dataset_utils import write_synth_scene

logger = logging.getLogger(__name__)


def add_arguments(parser):
    """
    Add synth arguments to a parser.

    Parameters
    ----------
    parser : ArgumentParser
        Parser.
    """
    parser.add_argument('directory',
                        help='Output directory.')
    parser.add_argument('--size', type=int, default=64,
                        help='Scene side.')
    parser.add_argument('--hsi-bands', type=int, default=8,
                        help='HSI bands.')
    parser.add_argument('--x-bands', type=int, default=2,
                        help='X bands.')
    parser.add_argument('--classes', type=int, default=4,
                        help='Number of classes.')
    parser.add_argument('--noise', type=float, default=0.02,
                        help='Noise standard deviation.')
    parser.add_argument('--tile', type=int, default=32,
                        help='Tile side written to the run config.')
    parser.add_argument('--train-region',
                        help="Training region ('r0,c0,r1,c1;...').")
    parser.add_argument('--test-region',
                        help="Test region ('r0,c0,r1,c1;...').")


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


def toy_run_values(manifest, hsi_bands, x_bands, classes, tile, seed=0):
    """
    Run-config values for the toy model on a synthetic scene.

    Parameters
    ----------
    manifest : str
        Manifest path as written in the run config.
    hsi_bands, x_bands, classes : int
        Scene description.
    tile : int
        Tile side.
    seed : int, optional (default 0)
        Seed.
    """
    model = ModelConfig.toy(hsi_bands=hsi_bands, x_bands=x_bands,
                            num_classes=classes, seed=seed).validate()
    train = TrainConfig(lr=5e-3, weight_decay=0., epochs=100, seed=seed,
                        max_steps=300, tile=tile).validate()
    values = OrderedDict([('manifest', manifest)])
    values.update(model.to_values())
    for key, value in train.to_values().items():
        values.setdefault(key, value)
    return values


def main(directory, size=64, hsi_bands=8, x_bands=2, classes=4, noise=0.02,
         seed=0, tile=32, train_region=None, test_region=None):
    """
    Write the scene files, 'manifest.txt' and 'run.cfg'. Returns the run
    config filename.

    Parameters
    ----------
    directory : str
        Output directory.
    size : int, optional (default 64)
        Scene side.
    hsi_bands : int, optional (default 8)
        HSI bands.
    x_bands : int, optional (default 2)
        X bands.
    classes : int, optional (default 4)
        Number of classes.
    noise : float, optional (default 0.02)
        Noise standard deviation.
    seed : int, optional (default 0)
        Scene, model and training seed.
    tile : int, optional (default 32)
        Tile side written to the run config.
    train_region, test_region : str, optional
        Regions written to the manifest.
    """
    manifest = write_synth_scene(directory, seed, size, hsi_bands, x_bands,
                                 classes, noise, train_region, test_region)
    values = toy_run_values(os.path.basename(manifest), hsi_bands, x_bands,
                            classes, tile, seed)
    filename = os.path.join(directory, 'run.cfg')
    write_text(format_key_values(values, comments=['toy run config']),
               filename)
    logger.info('Wrote %s and %s', manifest, filename)
    return filename

if __name__ == '__main__':
    args = parse_args()
    configure(args.precision, args.quiet)
    main(args.directory, args.size, args.hsi_bands, args.x_bands,
         args.classes, args.noise, args.seed or 0, args.tile,
         args.train_region, args.test_region)
