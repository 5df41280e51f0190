"""Exceptions raised by superextremal, each tagged with the CLI exit code it maps to."""


class SuperextremalError(Exception):
    exit_code = 1


class ArgumentError(SuperextremalError, ValueError):
    """A precondition on an operation's arguments does not hold."""

    exit_code = 2


class SizingError(ArgumentError):
    """A grid would exceed the configured site cap."""


class ConfigError(SuperextremalError):
    """The run configuration or a query file is invalid or unreadable."""

    exit_code = 2


class NumericalError(SuperextremalError, ArithmeticError):
    """Factorization failed or a draw produced non-finite values."""

    exit_code = 3
