"""Exception types shared across the package."""


class DfaEsnError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(DfaEsnError, ValueError):
    """Operands have incompatible shapes; message names both."""


class NumericsError(DfaEsnError, ValueError):
    """Invalid numeric argument (bad density, non-square matrix, ...)."""


class ParseError(DfaEsnError, ValueError):
    """Malformed dataset file. Carries a line number when one is known."""

    def __init__(self, message, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SpecError(DfaEsnError, ValueError):
    """Invalid experiment spec. Message starts with the offending field path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ModelFormatError(DfaEsnError, ValueError):
    """Saved model file is unreadable or has an unsupported version."""
