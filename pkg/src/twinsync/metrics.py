"""Tracking error and normalized communication load."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError

REFERENCE_RATE_PPS = 1000
ERROR_MODES = ("mse", "rmse")


@dataclass(frozen=True)
class EpochMetrics:
    mse_deg2: float
    packets_sent: int
    load_norm: float
    included_ticks: int


def tracking_mse(truth, twin_values, window=None):
    """Mean squared difference of two per-tick signals over ``window`` (default: all)."""
    truth = np.asarray(getattr(truth, "samples", truth), dtype=np.float64)
    twin = np.asarray(twin_values, dtype=np.float64)
    if truth.shape != twin.shape:
        raise DomainError("truth and twin signals must have equal length")
    if window is not None:
        start, end = window
        truth, twin = truth[start:end], twin[start:end]
    if truth.size == 0:
        raise DomainError("tracking error over an empty window")
    diff = truth - twin
    return float(np.dot(diff, diff) / diff.size)


def normalized_load(packets_sent, duration_ms):
    """Sender packet rate as a fraction of the 1000 packets/s no-decimation rate."""
    if duration_ms <= 0:
        raise DomainError("duration_ms must be positive")
    return (packets_sent * 1000 / duration_ms) / REFERENCE_RATE_PPS


def error_measure(mse_deg2, mode="mse"):
    """Quantity compared against the tracking-error budget: MSE (deg^2) or RMSE (deg)."""
    if mode == "mse":
        return mse_deg2
    if mode == "rmse":
        return math.sqrt(mse_deg2)
    raise DomainError(f"error mode must be one of {ERROR_MODES}")
