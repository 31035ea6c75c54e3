"""Exception types shared across the package."""


class PoolTestError(Exception):
    """Base class for errors raised by this package."""


class UnsupportedSizeError(PoolTestError):
    """An operation was asked to run above its documented size limit."""

    def __init__(self, message: str, *, limit: int | None = None, n: int | None = None):
        super().__init__(message)
        self.limit = limit
        self.n = n


class DecodeError(PoolTestError):
    """A serialized procedure could not be parsed or failed validation."""

    def __init__(self, message: str, *, violations: tuple[str, ...] = ()):
        super().__init__(message)
        self.violations = violations


class SessionError(PoolTestError):
    """A live testing session was driven outside its legal transitions."""
