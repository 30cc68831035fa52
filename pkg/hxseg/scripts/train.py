#!/usr/bin/env python
"""
Train a segmentation network on the training split of a manifest and save the
best checkpoint and the run log.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

import argparse
import logging
import warnings

from hxseg.models.network import build, check_input_shape
from hxseg.scripts import configure, global_parser, HelpFormatter, RunConfig
from hxseg.training import RunLog, train
from hxseg.utils.dataset_utils import (build_tile_dataset, load_scene,
                                       read_manifest, split_validation,
                                       subsample_train)

logger = logging.getLogger(__name__)


def add_arguments(parser):
    """
    Add train arguments to a parser.

    Parameters
    ----------
    parser : ArgumentParser
        Parser.
    """
    parser.add_argument('--fraction', type=float,
                        help='Fraction of training pixels kept per class.')
    parser.add_argument('--epochs', type=int,
                        help='Epochs, overriding the config.')
    parser.add_argument('--max-steps', type=int,
                        help='Optimizer step cap, overriding the config.')
    parser.add_argument('-o', '--checkpoint', default='model.ckpt',
                        help='Output checkpoint.')
    parser.add_argument('--log',
                        help='Run log (default: checkpoint name + .log).')


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


def overrides_from_args(args):
    """Flag overrides as run-config keys."""
    return {'seed': args.seed,
            'train_fraction': getattr(args, 'fraction', None),
            'epochs': getattr(args, 'epochs', None),
            'max_steps': getattr(args, 'max_steps', None)}


def prepare_tiles(run, scene, log):
    """
    Training and validation tiles of a scene.

    Warnings raised while splitting and subsampling are copied into the run
    log.

    Parameters
    ----------
    run : RunConfig
        Run config.
    scene : Scene
        Loaded scene.
    log : RunLog
        Run log.
    """
    config = run.train
    check_input_shape(run.model, config.tile, config.tile)
    ignore = scene.manifest.ignore_label
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always')
        labels = scene.split('train')
        labels = subsample_train(labels, config.train_fraction, config.seed,
                                 ignore)
    for warning in caught:
        logger.warning('%s', warning.message)
        log.warning(warning.message)
    tiles = build_tile_dataset(scene.hsi, scene.x, labels, config.tile,
                               config.overlap, ignore)
    if not tiles:
        raise ValueError('No training tile holds a labeled pixel.')
    return split_validation(tiles, config.val_fraction, config.seed)


def fit(run, scene, log=None):
    """
    Train the model of a run config on a loaded scene.

    Parameters
    ----------
    run : RunConfig
        Run config.
    scene : Scene
        Loaded scene.
    log : RunLog, optional
        Run log.
    """
    if log is None:
        log = RunLog()
    log.header(run.to_values())
    train_tiles, val_tiles = prepare_tiles(run, scene, log)
    logger.info('Training on %d tiles, validating on %d', len(train_tiles),
                len(val_tiles))
    model = build(run.model)
    return train(model, train_tiles, run.train, val_tiles, log,
                 scene.manifest.ignore_label)


def main(config_filename, checkpoint_filename, log_filename=None,
         overrides=None):
    """
    Train and write the best checkpoint and the run log.

    Parameters
    ----------
    config_filename : str
        Run config.
    checkpoint_filename : str
        Output checkpoint.
    log_filename : str, optional
        Output run log (default: checkpoint name + '.log').
    overrides : dict, optional
        Run-config keys set from flags.
    """
    run = RunConfig.from_file(config_filename, overrides)
    scene = load_scene(read_manifest(run.manifest))
    log = RunLog()
    checkpoint = fit(run, scene, log)
    checkpoint.save(checkpoint_filename)
    if log_filename is None:
        log_filename = checkpoint_filename + '.log'
    log.write(log_filename)
    logger.info('Best validation OA %.4f at epoch %d; wrote %s',
                checkpoint.best_val_oa, checkpoint.best_epoch,
                checkpoint_filename)
    return checkpoint

if __name__ == '__main__':
    args = parse_args()
    configure(args.precision, args.quiet)
    main(args.config, args.checkpoint, args.log, overrides_from_args(args))
