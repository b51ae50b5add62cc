"""Matrix type and the errors shared by the diffcore operations."""

import numpy as np

# Dense 2-D float64 array, row-major.
Matrix = np.ndarray


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class StateError(RuntimeError):
    """An operation was called out of order (e.g. backward before forward)."""


class NonFiniteError(ArithmeticError):
    """A public operation produced NaN or Inf."""


def as_matrix(x, name: str = "x") -> Matrix:
    """Coerce to a 2-D float64 array, rejecting other ranks."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def ensure_finite(x: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"{name} contains non-finite values")
    return x
