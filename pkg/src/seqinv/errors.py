"""Exception types raised by seqinv.

All of them subclass :class:`ValueError`, so callers that only care about
"bad input" can catch that.
"""


class OutOfScopeError(ValueError):
    """Inputs fall outside the parameter range where a rate result holds."""


class NonMonotoneError(ValueError):
    """The noise-to-prior ratio sequence is not monotonically increasing."""


class NoFiniteTruncationError(ValueError):
    """No finite truncation level makes every tail variance fall below the floor."""
