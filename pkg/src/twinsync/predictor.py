"""Twin-side reconstruction: keep the freshest received samples and
extrapolate them to the horizon chosen by the agent."""
from __future__ import annotations

import copy
from collections import deque

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import DomainError
from .validation import check_is_fitted, check_member, check_signal

HORIZONS_MS = (0, 5, 10, 20, 50, 100)
METHODS = ("ZOH", "LINEAR", "AR")
_COND_LIMIT = 1e12


def check_horizon(horizon_ms):
    if horizon_ms not in HORIZONS_MS:
        raise DomainError(f"prediction horizon {horizon_ms!r} ms is not in {HORIZONS_MS}")
    return int(horizon_ms)


def fit_ar(window, order, ridge=1e-8):
    """Least-squares AR coefficients ``a`` with ``x[k] ~ sum_j a[j] * x[k-1-j]``.

    Returns ``None`` when the (ridge-regularized) normal equations are
    numerically singular; callers fall back to a simpler extrapolator.
    """
    x = check_signal(window, "window")
    if order < 1:
        raise DomainError("AR order must be >= 1")
    if x.size < 2 * order + 1:
        raise DomainError(f"AR({order}) needs at least {2 * order + 1} samples, got {x.size}")
    n = x.size
    # row k holds x[k-1], ..., x[k-p] for target x[k]
    lagged = np.column_stack([x[order - 1 - j : n - 1 - j] for j in range(order)])
    target = x[order:]
    gram = lagged.T @ lagged + ridge * np.eye(order)
    if np.linalg.cond(gram) > _COND_LIMIT:
        return None
    try:
        coef = np.linalg.solve(gram, lagged.T @ target)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(coef)):
        return None
    return coef


def ar_forecast(window, coef, steps):
    """Iterate the AR recursion ``steps`` (real-valued, >= 0) periods past the window end.

    Fractional steps interpolate linearly between neighbouring integer
    forecasts, which keeps the result continuous in ``steps``.
    """
    p = coef.size
    buf = list(np.asarray(window, dtype=np.float64)[-p:])
    path = [buf[-1]]
    for _ in range(int(np.ceil(steps))):
        nxt = float(np.dot(coef, buf[::-1][:p]))
        buf.append(nxt)
        path.append(nxt)
    lo = int(np.floor(steps))
    frac = steps - lo
    if frac == 0.0:
        return path[lo]
    return path[lo] + frac * (path[lo + 1] - path[lo])


class TwinPredictor(BaseEstimator):
    """Per-episode predictor state plus extrapolation.

    Parameters
    ----------
    method : {"ZOH", "LINEAR", "AR"}
    ar_order : int
        AR order ``p`` (AR only).
    window : int
        Ring-buffer length ``W``; must be at least ``p + 1`` for AR.
    ridge : float
        Tikhonov term added to the AR normal equations.
    period_ms : int or None
        Resampling period for the AR fit. ``None`` infers the most recent
        inter-sample gap.
    """

    def __init__(self, method="LINEAR", ar_order=4, window=32, ridge=1e-8, period_ms=None):
        self.method = method
        self.ar_order = ar_order
        self.window = window
        self.ridge = ridge
        self.period_ms = period_ms

    def _validate(self):
        check_member(self.method, METHODS, "predictor.method")
        if self.window < 2:
            raise DomainError("predictor.window must be >= 2")
        if self.method == "AR" and self.window < self.ar_order + 1:
            raise DomainError("predictor.window must be >= ar_order + 1 for AR")

    def reset(self):
        self._validate()
        self.history_ = deque(maxlen=self.window)
        return self

    def fit(self, X, y=None):
        """Load ``(measure_tick, angle)`` pairs; ``X`` holds ticks, ``y`` angles.

        Pairs are ingested in the given order, so stale ones are dropped just
        as they would be on arrival.
        """
        ticks = np.asarray(X).reshape(-1)
        angles = check_signal(y, "y")
        if ticks.size != angles.size:
            raise ValueError("X and y lengths differ")
        self.reset()
        for t, a in zip(ticks, angles):
            self.push(int(t), float(a))
        return self

    def push(self, measure_tick, angle_deg):
        """Add one sample; returns False (and changes nothing) when it is stale."""
        h = self.history_
        if h and measure_tick <= h[-1][0]:
            return False
        h.append((measure_tick, angle_deg))
        return True

    @property
    def newest_tick(self):
        check_is_fitted(self, "history_")
        return self.history_[-1][0] if self.history_ else None

    def twin_value(self, horizon_ms):
        """Angle extrapolated to ``newest measure tick + horizon_ms``; 0 before any sample."""
        check_is_fitted(self, "history_")
        h = self.history_
        if not h:
            return 0.0
        if horizon_ms == 0 or self.method == "ZOH" or len(h) == 1:
            return h[-1][1]
        if self.method == "AR":
            value = self._ar_value(horizon_ms)
            if value is not None:
                return value
        (t0, x0), (t1, x1) = h[-2], h[-1]
        return x1 + (x1 - x0) * (horizon_ms / (t1 - t0))

    def predict(self, X):
        """Extrapolate to absolute target ticks ``X`` (each at or after the newest tick)."""
        check_is_fitted(self, "history_")
        targets = np.asarray(X, dtype=np.float64).reshape(-1)
        if not self.history_:
            return np.zeros_like(targets)
        newest = self.history_[-1][0]
        if np.any(targets < newest):
            raise DomainError("targets must not precede the newest received sample")
        return np.array([self.twin_value(float(t - newest)) for t in targets])

    def _ar_value(self, horizon_ms):
        h = self.history_
        p = self.ar_order
        ticks = np.fromiter((t for t, _ in h), dtype=np.float64, count=len(h))
        vals = np.fromiter((v for _, v in h), dtype=np.float64, count=len(h))
        period = self.period_ms or (ticks[-1] - ticks[-2])
        n_grid = int((ticks[-1] - ticks[0]) // period) + 1
        if n_grid < 2 * p + 1:
            return None
        grid = ticks[-1] - period * np.arange(n_grid - 1, -1, -1)
        resampled = np.interp(grid, ticks, vals)
        coef = fit_ar(resampled, p, self.ridge)
        if coef is None:
            return None
        value = ar_forecast(resampled, coef, horizon_ms / period)
        return value if np.isfinite(value) else None


def new_state(method="LINEAR", ar_order=4, window=32, ridge=1e-8, period_ms=None):
    return TwinPredictor(method, ar_order, window, ridge, period_ms).reset()


def ingest(state: TwinPredictor, arrival):
    """Value-style ingest: a copy of ``state`` with the arrival applied."""
    _, pkt = arrival
    out = copy.deepcopy(state)
    out.push(pkt.measure_tick, pkt.angle_deg)
    return out


def twin_value(state: TwinPredictor, horizon_ms):
    return state.twin_value(check_horizon(horizon_ms))
