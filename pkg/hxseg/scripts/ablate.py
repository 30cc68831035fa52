#!/usr/bin/env python
"""
Train and score variants of a base run config along one ablation axis:
encoder layout, convolution block, FEM/FIFM switches or training fraction.

Every variant shares the base seed and training budget and is scored on the
test split of the manifest.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

import argparse
from collections import OrderedDict
import dataclasses
import logging
import sys

from hxseg.models.network import with_conv_variant, with_layout, with_modules
from hxseg.scripts import configure, global_parser, HelpFormatter, RunConfig
from hxseg.scripts.train import fit, overrides_from_args
from hxseg.training import predict_scene, RunLog
from hxseg.training.metrics import comparison_table, compute_metrics
from hxseg.utils import write_text
from hxseg.utils.dataset_utils import load_scene, read_manifest

logger = logging.getLogger(__name__)

LAYOUTS = ('C-T-T-T', 'C-C-T-T', 'C-C-C-T', 'C-C-C-C')
CONV_VARIANTS = OrderedDict([('MBConv', 'mbconv'),
                             ('Fused-MBConv with SE', 'with_se'),
                             ('Fused-MBConv', 'plain')])
MODULE_SWITCHES = OrderedDict([('neither', (False, False)),
                               ('fem', (True, False)),
                               ('fifm', (False, True)),
                               ('fem+fifm', (True, True))])
FRACTIONS = (1.0, 0.8, 0.6, 0.4)
AXES = ('layout', 'convblock', 'fem', 'fifm', 'fraction')


def add_arguments(parser):
    """
    Add ablate arguments to a parser.

    Parameters
    ----------
    parser : ArgumentParser
        Parser.
    """
    parser.add_argument('axis', choices=AXES,
                        help="Ablation axis; 'fem' and 'fifm' both run the "
                             "four on/off combinations.")
    parser.add_argument('--epochs', type=int,
                        help='Epochs, overriding the config.')
    parser.add_argument('--max-steps', type=int,
                        help='Optimizer step cap, overriding the config.')
    parser.add_argument('-o', '--out',
                        help='Output table (CSV; default: stdout).')


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


def variants(run, axis):
    """
    (name, RunConfig) pairs of an ablation axis.

    Parameters
    ----------
    run : RunConfig
        Base run config.
    axis : str
        One of AXES.
    """
    if axis == 'layout':
        return [(layout, run.replace(model=with_layout(run.model, layout)))
                for layout in LAYOUTS]
    if axis == 'convblock':
        return [(name, run.replace(model=with_conv_variant(run.model, v)))
                for name, v in CONV_VARIANTS.items()]
    if axis in ('fem', 'fifm'):
        return [(name, run.replace(model=with_modules(run.model, fem, fifm)))
                for name, (fem, fifm) in MODULE_SWITCHES.items()]
    if axis == 'fraction':
        return [('{:.0f}%'.format(100 * f),
                 run.replace(train=dataclasses.replace(
                     run.train, train_fraction=f).validate()))
                for f in FRACTIONS]
    raise ValueError("Unknown ablation axis '{}'; choose from {}.".format(
        axis, ', '.join(AXES)))


def score_variant(run, scene):
    """
    Train one variant and score its prediction on the test split.

    Parameters
    ----------
    run : RunConfig
        Variant run config.
    scene : Scene
        Loaded scene.
    """
    checkpoint = fit(run, scene, RunLog())
    model = checkpoint.build_model()
    logits = predict_scene(model, scene.hsi, scene.x, run.train.tile,
                           run.train.overlap)
    manifest = scene.manifest
    return compute_metrics(logits.argmax(axis=-1), scene.split('test'),
                           manifest.num_classes, manifest.ignore_label)


def main(config_filename, axis, output_filename=None, overrides=None):
    """
    Run an ablation and write the comparison table. Returns the table as a
    pandas DataFrame indexed by variant.

    Parameters
    ----------
    config_filename : str
        Base run config.
    axis : str
        One of AXES.
    output_filename : str, optional
        Output CSV; printed when absent.
    overrides : dict, optional
        Run-config keys set from flags.
    """
    run = RunConfig.from_file(config_filename, overrides)
    scene = load_scene(read_manifest(run.manifest))
    rows = []
    for name, variant in variants(run, axis):
        logger.info('Variant %s', name)
        report = score_variant(variant, scene)
        logger.info('Variant %s: OA %.2f', name, 100 * report.oa)
        rows.append((name, report))
    table = comparison_table(rows)
    if output_filename is None:
        sys.stdout.write(table.to_string() + '\n')
    else:
        write_text(table.to_csv(), output_filename)
    return table

if __name__ == '__main__':
    args = parse_args()
    configure(args.precision, args.quiet)
    main(args.config, args.axis, args.out, overrides_from_args(args))
