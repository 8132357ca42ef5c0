"""Resolution-decoupled bilateral-grid affine engine for video dehazing."""
from .errors import (DegenerateField, DegenerateFit, DivergenceDetected, DomainError, EmptyMask,
                     FormatError, LibraError, ShapeMismatch, SingularResolvent, TooSmall, ZeroAnchor)

__version__ = "0.1.0"


def set_threads(n):
    """Cap the worker threads used by the per-pixel kernels."""
    import numba
    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
