"""
Command-line scripts.

A run config is one key-value file holding the model keys, the training keys
and 'manifest' (relative to the config file). The 'seed' key seeds both model
initialization and training. Command-line flags override file keys.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

import argparse
from collections import OrderedDict
import copy
import logging
import os

from hxseg import ConfigError
from hxseg.autograd import set_default_dtype
from hxseg.models.network import ModelConfig
from hxseg.training import TrainConfig
from hxseg.utils import (check_no_extra_keys, format_key_values,
                         read_key_values, write_text)
from hxseg.utils.dataset_utils import read_manifest

# model keys that default to the manifest when a run config omits them
MANIFEST_DEFAULTS = (('hsi_bands', 'hsi_bands'), ('x_bands', 'x_bands'),
                     ('num_classes', 'num_classes'))


class HelpFormatter(argparse.RawTextHelpFormatter):
    """
    Argparse help formatter with better indenting.
    """
    def __init__(self, prog, indent_increment=2, max_help_position=8,
                 width=None):
        super(HelpFormatter, self).__init__(prog, indent_increment,
                                            max_help_position, width)


def global_parser():
    """
    Parent parser carrying the flags shared by every command.
    """
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument('--config',
                        help='Run config (model and training keys plus '
                             'manifest).')
    parser.add_argument('--seed', type=int,
                        help='Seed overriding the config.')
    parser.add_argument('--precision', choices=['f32', 'f64'], default='f64',
                        help='Floating point precision.')
    parser.add_argument('--threads', type=int, default=1,
                        help='Tiles forwarded concurrently.')
    parser.add_argument('--quiet', action='store_true',
                        help='Only log warnings.')
    return parser


def configure(precision='f64', quiet=False):
    """
    Apply process-wide settings: precision and logging level.

    Parameters
    ----------
    precision : str, optional (default 'f64')
        'f32' or 'f64'.
    quiet : bool, optional (default False)
        Log warnings only.
    """
    set_default_dtype(precision)
    logging.basicConfig(
        level=logging.WARNING if quiet else logging.INFO,
        format='%(asctime)s %(name)s %(levelname)s: %(message)s')


class RunConfig(object):
    """
    Model config, training config and manifest of one run.

    Parameters
    ----------
    model : ModelConfig
        Model config.
    train : TrainConfig
        Training config.
    manifest : str
        Manifest filename.
    """
    def __init__(self, model, train, manifest):
        self.model = model
        self.train = train
        self.manifest = manifest

    @classmethod
    def from_file(cls, filename, overrides=None):
        """
        Read a run config, applying flag overrides and manifest defaults.

        Parameters
        ----------
        filename : str
            Run config filename.
        overrides : dict, optional
            Key-value text pairs replacing file keys; None values are
            skipped.
        """
        if filename is None:
            raise ConfigError('A run config is required (--config).')
        values = read_key_values(filename)
        for key, value in (overrides or {}).items():
            if value is not None:
                values[key] = str(value)
        if 'manifest' not in values:
            raise ConfigError("'{}' does not name a manifest.".format(
                filename))
        manifest = values.pop('manifest')
        if not os.path.isabs(manifest):
            manifest = os.path.join(
                os.path.dirname(os.path.abspath(filename)), manifest)
        dataset = read_manifest(manifest)
        for key, attr in MANIFEST_DEFAULTS:
            if key not in values:
                values[key] = str(getattr(dataset, attr))
        seed = values.get('seed')
        model = ModelConfig.pop_values(values)
        if seed is not None:
            values['seed'] = seed
        train = TrainConfig.pop_values(values)
        check_no_extra_keys(values, filename)
        run = cls(model.validate(), train.validate(), manifest)
        run.check_manifest(dataset)
        return run

    def check_manifest(self, dataset):
        """
        Reject a model whose bands or classes disagree with the manifest.

        Parameters
        ----------
        dataset : DatasetManifest
            Manifest.
        """
        for key, attr in MANIFEST_DEFAULTS:
            ours, theirs = getattr(self.model, key), getattr(dataset, attr)
            if ours != theirs:
                raise ConfigError('{} is {} in the run config but {} in the '
                                  'manifest.'.format(key, ours, theirs))

    def replace(self, model=None, train=None):
        """
        Copy with the model and/or training config replaced.

        Parameters
        ----------
        model : ModelConfig, optional
            New model config.
        train : TrainConfig, optional
            New training config.
        """
        return RunConfig(model if model is not None else self.model,
                         train if train is not None else copy.copy(self.train),
                         self.manifest)

    def to_values(self):
        """Effective key-value pairs; 'seed' appears once."""
        values = OrderedDict([('manifest', self.manifest)])
        values.update(self.model.to_values())
        for key, value in self.train.to_values().items():
            if key not in values:
                values[key] = value
        return values

    def write(self, filename):
        """
        Write the run config.

        Parameters
        ----------
        filename : str
            Output filename.
        """
        write_text(format_key_values(self.to_values()), filename)
