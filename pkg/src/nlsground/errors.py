"""Exception hierarchy.

Every error raised by the package derives from :class:`NlsError`, so callers
(and the CLI exit-code mapping) can catch by category.
"""


class NlsError(Exception):
    """Base class for all package errors."""


class ConfigError(NlsError, ValueError):
    """Invalid grid, model, constraint or solver parameters."""


class ParseError(ConfigError):
    """Config text could not be parsed; carries the offending line and key."""

    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        text = message if line is None else f"{message} at line {line}"
        if key is not None:
            text += f" (key '{key}')"
        super().__init__(text)


class RangeError(NlsError, OverflowError):
    """A nonlinearity exponent or a dilation left the representable range."""


class DegenerateStateError(NlsError, ValueError):
    """A state component has zero mass (or is otherwise unusable)."""


class NoMaximizerError(NlsError):
    """The fiber derivative has no + to - sign change on the scan window."""


class NonUniquenessError(NlsError):
    """More than one fiber maximizer was bracketed on the scan window."""

    def __init__(self, message, brackets=()):
        self.brackets = list(brackets)
        super().__init__(message)


class InvalidPathError(NlsError, ValueError):
    """Mountain-pass path endpoints do not satisfy the sign conditions."""


class NonConvergenceError(NlsError):
    """No solver start converged; ``trail`` holds the best start's monitor."""

    def __init__(self, message, trail=None, best=None):
        self.trail = trail if trail is not None else []
        self.best = best
        super().__init__(message)


class RefusedError(NlsError):
    """A verification was requested on input that does not meet its precondition."""
