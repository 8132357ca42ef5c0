"""Exception types raised across the package."""


class LibraError(Exception):
    """Base class for all package errors."""


class SingularResolvent(LibraError, ArithmeticError):
    """``I - M/2`` is (numerically) singular, so the Cayley map is undefined."""

    def __init__(self, message, pixel=None):
        super().__init__(message)
        self.pixel = pixel


class ShapeMismatch(LibraError, ValueError):
    pass


class DomainError(LibraError, ValueError):
    pass


class DegenerateFit(LibraError, ValueError):
    pass


class DegenerateField(LibraError, ValueError):
    pass


class EmptyMask(LibraError, ValueError):
    pass


class ZeroAnchor(LibraError, ValueError):
    pass


class TooSmall(LibraError, ValueError):
    pass


class DivergenceDetected(LibraError, RuntimeError):
    pass


class FormatError(LibraError, ValueError):
    """A binary or text file does not follow its declared layout."""
