"""Exception types shared by every module.

The CLI maps these onto exit codes: ``PreconditionError`` -> 2,
``NumericalError`` -> 3.
"""


class PreconditionError(ValueError):
    """An input violates an operation's stated precondition."""


class NumericalError(RuntimeError):
    """A numerical procedure diverged or failed a convergence check."""
