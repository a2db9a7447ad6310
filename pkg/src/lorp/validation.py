"""Input validation helpers used by the public entry points."""

from __future__ import annotations

import numpy as np

from .exceptions import ValidationError


def as_float_array(a, name="array"):
    """Coerce to a float64 ndarray, rejecting non-finite entries."""
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains NaN or infinite entries")
    return arr


def as_vector(a, name="vector"):
    arr = as_float_array(a, name)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def as_matrix(a, name="matrix"):
    arr = as_float_array(a, name)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be two-dimensional, got shape {arr.shape}")
    return arr


def require_square(a, name="matrix"):
    arr = as_matrix(a, name)
    if arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {arr.shape}")
    return arr


def require_symmetric(a, name="matrix", tol=1e-10):
    """Square check plus a symmetry check relative to the matrix scale."""
    arr = require_square(a, name)
    scale = max(1.0, float(np.abs(arr).max()))
    if np.abs(arr - arr.T).max() > tol * scale:
        raise ValidationError(f"{name} is not symmetric within tolerance {tol}")
    return arr


def check_xy(x, y):
    """Validate a paired design/response and return them as float arrays."""
    xm = as_matrix(x, "x")
    yv = as_vector(y, "y")
    if xm.shape[0] != yv.shape[0]:
        raise ValidationError(
            f"x and y disagree on sample count: {xm.shape[0]} vs {yv.shape[0]}"
        )
    if xm.shape[0] < 2:
        raise ValidationError("at least two observations are required")
    return xm, yv


def require_positive_int(value, name, minimum=1):
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def require_positive_float(value, name, allow_zero=False):
    try:
        val = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a real number, got {value!r}") from None
    if not np.isfinite(val):
        raise ValidationError(f"{name} must be finite, got {val}")
    if val < 0 or (val == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValidationError(f"{name} must be {bound}, got {val}")
    return val
