"""Exception hierarchy shared by every module."""

from __future__ import annotations


class LazyLightError(Exception):
    """Base class for all errors raised by this package."""


class DecodeError(LazyLightError, ValueError):
    """Byte string is not a canonical encoding of the requested object."""


class InvalidLength(LazyLightError, ValueError):
    pass


class NotPowerOfTwo(LazyLightError, ValueError):
    pass


class IndexOutOfRange(LazyLightError, IndexError):
    pass


class NotInnerNode(LazyLightError, ValueError):
    pass


class InvalidGenesis(LazyLightError, ValueError):
    pass


class InvalidBlockSize(LazyLightError, ValueError):
    pass


class NoDisagreement(LazyLightError):
    """Raised when a challenger is asked to pick a child but every child agrees."""


class NoProvers(LazyLightError, ValueError):
    pass


class InvalidParams(LazyLightError, ValueError):
    pass


class InvalidScenario(LazyLightError, ValueError):
    pass
