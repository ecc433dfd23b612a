"""Input validation helpers shared by the estimators."""

import numpy as np

from .exceptions import DimensionMismatch, LengthMismatch


def check_times_events(time, event):
    time = np.asarray(time, dtype=float).ravel()
    event = np.asarray(event).ravel()
    if time.shape != event.shape:
        raise LengthMismatch(
            f"time has {time.size} entries but event has {event.size}")
    if not np.all(np.isfinite(time)) or np.any(time < 0):
        raise ValueError("observed times must be finite and nonnegative")
    if event.dtype != bool:
        ev = np.asarray(event, dtype=float)
        if not np.all((ev == 0) | (ev == 1)):
            raise ValueError("event indicators must be 0/1 or boolean")
        event = ev.astype(bool)
    return time, event


def check_covariates(X, n=None, p=None):
    """Return ``X`` as a finite 2-d float array, optionally checking shape."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        as_row = n == 1 or (p is not None and p != 1 and X.size == p)
        X = X.reshape(1, -1) if as_row else X.reshape(-1, 1)
    if X.ndim != 2:
        raise DimensionMismatch(f"covariates must be 2-d, got {X.ndim}-d")
    if n is not None and X.shape[0] != n:
        raise LengthMismatch(f"expected {n} rows of covariates, got {X.shape[0]}")
    if p is not None and X.shape[1] != p:
        raise DimensionMismatch(f"expected {p} covariates, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("covariates must be finite")
    return X


def check_survival_target(y):
    """Split a survival target into ``(time, event)`` arrays.

    Accepts a structured array with ``time`` and ``event`` fields, a pair
    ``(time, event)`` or an ``(n, 2)`` array whose columns are time and event.
    """
    if isinstance(y, np.ndarray) and y.dtype.names is not None:
        return check_times_events(y["time"], y["event"])
    if isinstance(y, tuple) and len(y) == 2:
        return check_times_events(*y)
    arr = np.asarray(y, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DimensionMismatch("survival target must be (time, event) pairs")
    return check_times_events(arr[:, 0], arr[:, 1])


def make_survival_target(time, event):
    """Pack times and event flags into a structured array usable as ``y``."""
    time, event = check_times_events(time, event)
    y = np.empty(time.size, dtype=[("event", bool), ("time", float)])
    y["event"] = event
    y["time"] = time
    return y
