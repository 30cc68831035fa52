#!/usr/bin/env python
"""
Report the parameter count and forward FLOPs of a model config.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

import argparse
import logging
import sys

from hxseg.models.network import build, check_input_shape, ModelConfig
from hxseg.scripts import configure, global_parser, HelpFormatter, RunConfig
from hxseg.training.flops import profile_macs

logger = logging.getLogger(__name__)


def add_arguments(parser):
    """
    Add count arguments to a parser.

    Parameters
    ----------
    parser : ArgumentParser
        Parser.
    """
    parser.add_argument('--height', type=int, default=128,
                        help='Input height.')
    parser.add_argument('--width', type=int, default=128,
                        help='Input width.')


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


def main(config_filename=None, height=128, width=128):
    """
    Print parameters, FLOPs (2 x multiply-accumulates) and the MACs of every
    op label. Returns (params, flops).

    Parameters
    ----------
    config_filename : str, optional
        Run config; the toy model is counted when absent.
    height, width : int, optional (default 128)
        Input size.
    """
    if config_filename is None:
        config = ModelConfig.toy().validate()
    else:
        config = RunConfig.from_file(config_filename).model
    check_input_shape(config, height, width)
    model = build(config)
    counter = profile_macs(model, (height, width, config.hsi_bands),
                           (height, width, config.x_bands))
    params, flops = model.num_parameters(), 2 * counter.total()
    lines = ['layout {} at {}x{}'.format(config.layout, height, width),
             'params = {}'.format(params),
             'flops = {}'.format(flops)]
    for label, macs in sorted(counter.counts.items()):
        lines.append('macs[{}] = {}'.format(label, macs))
    sys.stdout.write('\n'.join(lines) + '\n')
    logger.info('%d parameters, %.3g GFLOPs', params, flops / 1e9)
    return params, flops

if __name__ == '__main__':
    args = parse_args()
    configure(args.precision, args.quiet)
    main(args.config, args.height, args.width)
