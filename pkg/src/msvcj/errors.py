"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented invariant (CLI exit code 2)."""


class CapExceededError(RuntimeError):
    """A configured resource cap would be exceeded (CLI exit code 3)."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details
