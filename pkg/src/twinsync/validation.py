"""Input validation helpers shared by the estimators and the simulator."""
from __future__ import annotations

import math

import numpy as np

from .exceptions import ConfigError


def check_probability(value, name):
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise ConfigError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def check_non_negative_int(value, name):
    if isinstance(value, bool) or int(value) != value or value < 0:
        raise ConfigError(f"{name} must be a non-negative integer, got {value!r}")
    return int(value)


def check_positive_int(value, name):
    value = check_non_negative_int(value, name)
    if value == 0:
        raise ConfigError(f"{name} must be positive")
    return value


def check_finite(value, name):
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{name} must be finite, got {value!r}")
    return value


def check_member(value, allowed, name):
    if value not in allowed:
        raise ConfigError(f"{name} must be one of {sorted(allowed)}, got {value!r}")
    return value


def check_range(lo_hi, name, lo_bound=-math.inf, hi_bound=math.inf):
    lo, hi = (float(v) for v in lo_hi)
    if not (lo_bound <= lo <= hi <= hi_bound):
        raise ConfigError(f"{name} must satisfy {lo_bound} <= low <= high <= {hi_bound}, got {lo_hi!r}")
    return lo, hi


def check_signal(values, name="samples"):
    """1-D finite float array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_is_fitted(estimator, attributes):
    from sklearn.exceptions import NotFittedError

    if isinstance(attributes, str):
        attributes = [attributes]
    if not all(hasattr(estimator, a) for a in attributes):
        raise NotFittedError(
            f"This {type(estimator).__name__} instance is not fitted yet; call 'fit' first."
        )
