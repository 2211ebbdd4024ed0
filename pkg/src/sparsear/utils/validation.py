"""Input validation helpers."""

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from ..exceptions import DataError, TooShort


def as_series(x, *, min_length=1, name="series"):
    """Return a finite 1-D float array from a TimeSeries, array or column vector.

    Raises
    ------
    DataError
        If values are not finite or the array is not one dimensional.
    TooShort
        If fewer than ``min_length`` samples are present.
    """
    values = getattr(x, "values", x)
    try:
        arr = check_array(values, ensure_2d=False, dtype=np.float64,
                          ensure_all_finite=True, ensure_min_samples=0)
    except ValueError as exc:
        raise DataError(f"{name}: {exc}") from exc
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise DataError(f"{name} must be one dimensional, got shape {arr.shape}")
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise DataError(f"{name} must be one dimensional")
    if arr.shape[0] < min_length:
        raise TooShort(f"{name} has {arr.shape[0]} samples, need at least {min_length}")
    return arr


def check_theta(theta):
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim == 0:
        theta = theta.reshape(1)
    if theta.ndim != 1 or theta.size == 0:
        raise DataError("theta must be a non-empty 1-D vector")
    if not np.all(np.isfinite(theta)):
        raise DataError("theta contains NaN or Inf")
    return theta


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise DataError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise DataError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise DataError(f"{name} must be a finite real, got {value!r}")
    if value < 0 or (strict and value == 0):
        raise DataError(f"{name} must be {'> 0' if strict else '>= 0'}, got {value}")
    return float(value)
