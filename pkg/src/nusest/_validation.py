"""Input validation helpers shared by the estimators."""

import numbers

import numpy as np


def check_real_vector(x, name="X"):
    """Return ``x`` as a finite 1-D float array.

    Column vectors of shape ``(n, 1)`` are accepted and flattened, which
    keeps the estimators usable with 2-D ``X`` inputs.
    """
    arr = np.asarray(x)
    if np.iscomplexobj(arr):
        raise ValueError(f"{name} must be real, got complex data")
    arr = arr.astype(float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D or a single column, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinity")
    return arr


def check_complex_vector(z, n=None, name="y"):
    arr = np.asarray(z, dtype=complex)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} has {arr.shape[0]} entries, expected {n}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinity")
    return arr


def check_scalar(value, name, *, min_val=None, max_val=None, include_min=True,
                 include_max=True):
    """Validate a finite real scalar against optional bounds."""
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    if min_val is not None:
        if value < min_val or (value == min_val and not include_min):
            raise ValueError(f"{name} == {value}, must be "
                             f"{'>=' if include_min else '>'} {min_val}")
    if max_val is not None:
        if value > max_val or (value == max_val and not include_max):
            raise ValueError(f"{name} == {value}, must be "
                             f"{'<=' if include_max else '<'} {max_val}")
    return value
