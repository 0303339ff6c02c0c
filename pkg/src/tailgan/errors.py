"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code contract: ValidationError -> 2,
InputOutputError -> 3, NumericalError -> 4.
"""


class TailganError(Exception):
    """Base class for all package errors."""


class ValidationError(TailganError, ValueError):
    """Bad arguments, domain violations, or config/constraint breaches."""


class ShapeError(ValidationError):
    """Nonconforming array shapes; message names the op and the shapes."""


class InputOutputError(TailganError, OSError):
    """Missing, unreadable, or unwritable files."""


class NumericalError(TailganError, RuntimeError):
    """A solver or optimizer failed to reach a certified result."""
