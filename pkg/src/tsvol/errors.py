"""Exception hierarchy for the tsvol package.

The CLI maps these onto exit codes: user-facing input problems exit
with 2, numerical failures with 3.
"""


class TsvolError(Exception):
    """Base class for all package errors."""


class ParameterError(TsvolError, ValueError):
    """A model or law parameter is outside its supported domain."""


class InputError(TsvolError, ValueError):
    """Bad user input: empty series, malformed config, out-of-range request."""


class BracketError(TsvolError, ArithmeticError):
    """A root or closed form could not be bracketed.

    The message carries diagnostic values (bracket endpoints, function
    values) and, where one exists, the recommended fallback.
    """


class OptimizerError(TsvolError, RuntimeError):
    """The derivative-free minimizer could not produce a finite result."""


class NumericsError(TsvolError, RuntimeError):
    """A numerical routine failed its internal accuracy contract."""
