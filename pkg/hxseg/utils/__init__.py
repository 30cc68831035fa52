"""
Miscellaneous utility functions, including the canonical key-value text format
shared by model, training and dataset configuration files.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

from collections import OrderedDict
import gzip

from hxseg import ConfigError


def read_text(filename):
    """
    Read text from (possibly gzipped) files.

    Parameters
    ----------
    filename : str
        Filename.
    """
    if filename.endswith('.gz'):
        f = gzip.open(filename, 'rt')
    else:
        f = open(filename)
    try:
        return f.read()
    finally:
        f.close()


def write_text(text, filename):
    """
    Write text to a (possibly gzipped) file.

    Parameters
    ----------
    text : str
        Text.
    filename : str
        Filename.
    """
    if filename.endswith('.gz'):
        f = gzip.open(filename, 'wt')
    else:
        f = open(filename, 'w')
    try:
        f.write(text)
    finally:
        f.close()


def parse_key_values(text, source='<text>'):
    """
    Parse canonical key-value text.

    One 'key = value' pair per line; blank lines and lines starting with '#'
    are skipped. Duplicate keys are rejected.

    Parameters
    ----------
    text : str
        Text to parse.
    source : str, optional
        Name used in error messages.
    """
    values = OrderedDict()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        if '=' not in line:
            raise ConfigError("{}:{}: expected 'key = value', got '{}'.".format(
                source, lineno, line))
        key, value = line.split('=', 1)
        key, value = key.strip(), value.strip()
        if not key:
            raise ConfigError('{}:{}: empty key.'.format(source, lineno))
        if key in values:
            raise ConfigError("{}:{}: duplicate key '{}'.".format(
                source, lineno, key))
        values[key] = value
    return values


def format_key_values(values, comments=None):
    """
    Render key-value pairs as canonical text.

    Parameters
    ----------
    values : dict
        Ordered mapping of keys to values; values are rendered with
        format_value.
    comments : list, optional
        Lines written first, each prefixed with '# '.
    """
    lines = []
    for comment in comments or []:
        lines.append('# {}'.format(comment))
    for key, value in values.items():
        lines.append('{} = {}'.format(key, format_value(value)))
    return '\n'.join(lines) + '\n'


def read_key_values(filename):
    """
    Read a key-value file.

    Parameters
    ----------
    filename : str
        Filename.
    """
    try:
        text = read_text(filename)
    except IOError as e:
        raise ConfigError("Cannot read '{}': {}".format(filename, e.strerror))
    return parse_key_values(text, source=filename)


def format_value(value):
    """
    Canonical text for a config value.

    Booleans are written 'true'/'false', lists comma separated and floats with
    repr precision.

    Parameters
    ----------
    value : object
        Value.
    """
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (list, tuple)):
        return ','.join(format_value(v) for v in value)
    if value is None:
        return 'none'
    return str(value)


def parse_bool(value, key='value'):
    """
    Parse 'true'/'false' (also '1'/'0', 'yes'/'no').

    Parameters
    ----------
    value : str
        Text.
    key : str, optional
        Key named in error messages.
    """
    lowered = value.strip().lower()
    if lowered in ('true', '1', 'yes'):
        return True
    if lowered in ('false', '0', 'no'):
        return False
    raise ConfigError("{} must be true or false, got '{}'.".format(key, value))


def parse_number(value, kind, key='value'):
    """
    Parse an int or float, naming the key on failure.

    Parameters
    ----------
    value : str
        Text.
    kind : type
        int or float.
    key : str, optional
        Key named in error messages.
    """
    try:
        return kind(value)
    except ValueError:
        raise ConfigError("{} must be {}, got '{}'.".format(
            key, 'an integer' if kind is int else 'a number', value))


def parse_list(value, kind=int, key='value'):
    """
    Parse a comma-separated list.

    Parameters
    ----------
    value : str
        Text.
    kind : type, optional (default int)
        Element type.
    key : str, optional
        Key named in error messages.
    """
    items = [item.strip() for item in value.split(',') if item.strip()]
    if kind is str:
        return items
    return [parse_number(item, kind, key) for item in items]


def pop_typed(values, key, kind, default):
    """
    Remove a key from a parsed mapping and convert it.

    Parameters
    ----------
    values : dict
        Parsed key-value pairs; the key is removed when present.
    key : str
        Key.
    kind : type
        int, float, bool or str.
    default : object
        Returned when the key is absent.
    """
    if key not in values:
        return default
    value = values.pop(key)
    if kind is bool:
        return parse_bool(value, key)
    if kind in (int, float):
        return parse_number(value, kind, key)
    return value


def check_no_extra_keys(values, source='config'):
    """
    Reject keys left over after every consumer has popped its own.

    Parameters
    ----------
    values : dict
        Remaining key-value pairs.
    source : str, optional
        Name used in the error message.
    """
    if values:
        raise ConfigError('Unknown key(s) in {}: {}.'.format(
            source, ', '.join(sorted(values))))
