"""Exception hierarchy shared by the library and the CLI.

Each class maps to one CLI exit code so that shell callers can
distinguish misuse from bad data from numerical breakdown.  Usage and
data errors also subclass ValueError (and numerical failures
ArithmeticError) so generic callers can catch the conventional types.
"""


class BestSubsetError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class UsageError(BestSubsetError, ValueError):
    """Invalid arguments, flags, or parameter combinations."""

    exit_code = 2


class DataError(BestSubsetError, ValueError):
    """Malformed or invalid input data (files, matrices, responses)."""

    exit_code = 3


class NumericalError(BestSubsetError, ArithmeticError):
    """A linear system or iteration failed beyond recovery."""

    exit_code = 4
