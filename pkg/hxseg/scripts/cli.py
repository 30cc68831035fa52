#!/usr/bin/env python
"""
Command-line entry point dispatching to the hxseg commands.

Exit codes: 0 on success, 1 for usage, configuration and input errors, 2 for
numerical failures (non-finite loss, failing gradient check).
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

import argparse
from collections import OrderedDict
import logging
import sys

from hxseg import NumericalError
from hxseg.scripts import ablate, configure, count, evaluate, global_parser
from hxseg.scripts import gradcheck, HelpFormatter, predict, synth, train

logger = logging.getLogger(__name__)

COMMANDS = OrderedDict([
    ('train', (train, 'Train a model and save the best checkpoint.')),
    ('predict', (predict, 'Predict a full-scene classification map.')),
    ('evaluate', (evaluate, 'Score a prediction against ground truth.')),
    ('gradcheck', (gradcheck, 'Run finite-difference gradient checks.')),
    ('synth', (synth, 'Write a synthetic scene and toy run config.')),
    ('ablate', (ablate, 'Train and score variants along one axis.')),
    ('count', (count, 'Count parameters and FLOPs.')),
])


class ArgumentParser(argparse.ArgumentParser):
    """
    Argument parser whose usage errors exit with status 1.
    """
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, '{}: error: {}\n'.format(self.prog, message))


def get_parser():
    """
    Parser with one subcommand per module in COMMANDS.
    """
    parser = ArgumentParser(prog='hxseg', description=__doc__,
                            formatter_class=HelpFormatter)
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True
    for name, (module, help_text) in COMMANDS.items():
        subparser = subparsers.add_parser(
            name, parents=[global_parser()], help=help_text,
            description=module.__doc__, formatter_class=HelpFormatter)
        module.add_arguments(subparser)
    return parser


def run_command(args):
    """
    Run a parsed command. Returns the exit code.

    Parameters
    ----------
    args : Namespace
        Parsed arguments.
    """
    if args.command == 'train':
        train.main(args.config, args.checkpoint, args.log,
                   train.overrides_from_args(args))
    elif args.command == 'predict':
        predict.main(args.checkpoint, args.manifest, args.out, args.logits,
                     args.tile, args.overlap, args.threads)
    elif args.command == 'evaluate':
        evaluate.main(args.prediction, args.manifest, args.out, args.split)
    elif args.command == 'gradcheck':
        passed, _ = gradcheck.main(args.scope, args.seed or 0)
        if not passed:
            sys.stderr.write('error: gradient check above tolerance\n')
            return 2
    elif args.command == 'synth':
        synth.main(args.directory, args.size, args.hsi_bands, args.x_bands,
                   args.classes, args.noise, args.seed or 0, args.tile,
                   args.train_region, args.test_region)
    elif args.command == 'ablate':
        ablate.main(args.config, args.axis, args.out,
                    train.overrides_from_args(args))
    elif args.command == 'count':
        count.main(args.config, args.height, args.width)
    return 0


def main(argv=None):
    """
    Parse arguments, run the command and map failures to exit codes.

    Parameters
    ----------
    argv : list, optional
        Arguments. If not provided, defaults to sys.argv[1:].
    """
    try:
        args = get_parser().parse_args(argv)
    except SystemExit as e:
        return e.code
    configure(args.precision, args.quiet)
    try:
        return run_command(args)
    except NumericalError as e:
        logger.debug('Numerical failure', exc_info=True)
        sys.stderr.write('error: {}\n'.format(e))
        return 2
    except (ValueError, OSError) as e:
        logger.debug('Command failed', exc_info=True)
        sys.stderr.write('error: {}\n'.format(e))
        return 1

if __name__ == '__main__':
    sys.exit(main())
