"""
Two-branch hyperspectral-X semantic segmentation.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"


class HxsegError(Exception):
    """
    Base class for errors raised by hxseg.
    """


class ShapeError(HxsegError, ValueError):
    """
    Tensor shapes are incompatible.
    """


class DivisibilityError(HxsegError, ValueError):
    """
    A spatial or sequence size is not divisible by a required factor.
    """


class ConfigError(HxsegError, ValueError):
    """
    A configuration rule is violated.
    """


class NumericalError(HxsegError, ArithmeticError):
    """
    A computation produced non-finite values.
    """
