#!/usr/bin/env python
"""
Score a predicted map (PPM) or logits file (HDF5) against the ground truth of
a manifest.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

import argparse
import logging
import sys

from hxseg import ShapeError
from hxseg.scripts import configure, global_parser, HelpFormatter
from hxseg.training.metrics import compute_metrics, format_report
from hxseg.utils import h5_utils, write_text
from hxseg.utils.dataset_utils import load_scene, read_manifest
from hxseg.utils.image_utils import read_map

logger = logging.getLogger(__name__)

SPLITS = ('test', 'train', 'all')


def add_arguments(parser):
    """
    Add evaluate arguments to a parser.

    Parameters
    ----------
    parser : ArgumentParser
        Parser.
    """
    parser.add_argument('prediction',
                        help='Predicted map (.ppm) or logits (.h5).')
    parser.add_argument('manifest',
                        help='Scene manifest with labels.')
    parser.add_argument('--split', choices=SPLITS, default='test',
                        help='Ground-truth region to score.')
    parser.add_argument('-o', '--out',
                        help='Output report (default: stdout).')


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


def read_prediction(filename, palette, ignore=-1):
    """
    Predicted labels from a rendered map or a logits dump.

    Parameters
    ----------
    filename : str
        Map or HDF5 filename.
    palette : dict
        Class palette used to parse maps.
    ignore : int, optional (default -1)
        Label of black map pixels.
    """
    if filename.endswith('.h5') or filename.endswith('.hdf5'):
        labels, _, _ = h5_utils.load_prediction(filename)
        return labels
    return read_map(filename, palette, ignore)


def ground_truth(scene, split):
    """
    Ground-truth labels of a split.

    Parameters
    ----------
    scene : Scene
        Loaded scene.
    split : str
        'test', 'train' or 'all'.
    """
    if scene.labels is None:
        raise ValueError('The manifest has no labels to evaluate against.')
    if split == 'all':
        return scene.labels
    return scene.split(split)


def main(prediction_filename, manifest_filename, output_filename=None,
         split='test'):
    """
    Compute and write the metrics report. Returns the MetricsReport.

    Parameters
    ----------
    prediction_filename : str
        Predicted map or logits.
    manifest_filename : str
        Scene manifest.
    output_filename : str, optional
        Output report; printed when absent.
    split : str, optional (default 'test')
        Ground-truth region.
    """
    manifest = read_manifest(manifest_filename)
    scene = load_scene(manifest)
    gt = ground_truth(scene, split)
    pred = read_prediction(prediction_filename, scene.palette,
                           manifest.ignore_label)
    if pred.shape != gt.shape:
        raise ShapeError('Prediction is {} but the ground truth is {}.'.format(
            pred.shape, gt.shape))
    report = compute_metrics(pred, gt, manifest.num_classes,
                             manifest.ignore_label)
    text = format_report(report)
    if output_filename is None:
        sys.stdout.write(text)
    else:
        write_text(text, output_filename)
    logger.info('OA %.2f AA %.2f kappa %.2f', 100 * report.oa,
                100 * report.aa, 100 * report.kappa)
    return report

if __name__ == '__main__':
    args = parse_args()
    configure(args.precision, args.quiet)
    main(args.prediction, args.manifest, args.out, args.split)
