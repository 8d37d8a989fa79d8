"""Input validation helpers shared by operators, solvers and problem builders."""

import numbers

import numpy as np

__all__ = [
    "as_vector",
    "as_matrix",
    "check_dim",
    "check_finite",
    "check_positive",
    "check_nonnegative",
    "check_in_range",
]


def as_vector(x, name="x"):
    """Coerce ``x`` to a 1-D float64 array (copies only if needed)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{name} must be a non-empty vector")
    return arr


def as_matrix(x, name="matrix"):
    """Coerce ``x`` to a 2-D float64 array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def check_dim(x, expected, name="vector"):
    """Raise if the 1-D array ``x`` does not have ``expected`` entries."""
    if x.shape[0] != expected:
        raise ValueError(
            f"{name} has dimension {x.shape[0]}, expected {expected}"
        )


def check_finite(x, name="array"):
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")


def check_nonnegative(value, name):
    if not isinstance(value, numbers.Real) or not value >= 0:
        raise ValueError(f"{name} must be nonnegative, got {value!r}")


def check_in_range(value, low, high, name, low_open=False, high_open=False):
    """Check ``low (<|<=) value (<|<=) high`` with configurable openness."""
    ok_low = value > low if low_open else value >= low
    ok_high = value < high if high_open else value <= high
    if not (isinstance(value, numbers.Real) and ok_low and ok_high):
        lo = "(" if low_open else "["
        hi = ")" if high_open else "]"
        raise ValueError(f"{name} must lie in {lo}{low}, {high}{hi}, got {value!r}")
