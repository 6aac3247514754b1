"""Exception hierarchy shared by all qi_lab modules.

The CLI maps these onto exit codes: ValidationError -> 1, the numerical
guards (TruncationError, UnresolvedOscillationError) -> 2, and
InvariantViolation -> 3.
"""


class QiLabError(Exception):
    """Base class for all qi_lab errors."""


class ValidationError(QiLabError):
    """Rejected input: bad parameter value, label outside a declared window,
    non-normalized state, unknown config key, or a dimension cap exceeded."""


class TruncationError(QiLabError):
    """A finite label window was too narrow for the requested accuracy."""

    def __init__(self, message, suggested_half_width=None):
        super().__init__(message)
        self.suggested_half_width = suggested_half_width


class UnresolvedOscillationError(QiLabError):
    """Numerical quadrature refused: the oscillatory integrand is not
    resolved by the requested number of panels."""

    def __init__(self, message, required_steps=None):
        super().__init__(message)
        self.required_steps = required_steps


class InvariantViolation(QiLabError):
    """An internal consistency check failed; indicates a bug, not bad input."""
