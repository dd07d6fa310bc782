"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition or invariant."""


class ParseError(ValueError):
    """Raised when a file cannot be parsed; message carries the line number."""


class MapFormatError(ParseError):
    """Raised when a serialized map is truncated, corrupt, or version-mismatched."""
