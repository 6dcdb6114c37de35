"""Exception types shared across the library."""


class OvtlError(Exception):
    """Base class for library errors."""


class ResolutionError(OvtlError):
    """A requested scale, cube or dilate is too fine for the grid."""


class GridMismatchError(OvtlError):
    """Operands live on different grids (or different matrix dimensions)."""


class HypothesisError(OvtlError):
    """A theorem hypothesis (support/shape condition) fails, so the
    corresponding bound is not claimed."""


class ValidationError(OvtlError):
    """Numerical input violates a structural contract (e.g. a matrix that
    should be Hermitian PSD is not, beyond tolerance)."""
