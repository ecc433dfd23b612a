"""Survival data container and the Kaplan-Meier product-limit estimator.

Survivor functions follow the convention ``S(t) = P(T >= t)``: the step at an
event time ``t_k`` only takes effect for ``t > t_k``.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import check_covariates, check_times_events
from .exceptions import NoEvents


class ObservedSubject(NamedTuple):
    time: float
    event: bool
    covariates: tuple


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Observed times, event flags and an ``(n, p)`` covariate matrix."""

    time: np.ndarray
    event: np.ndarray
    X: np.ndarray
    covariate_names: tuple = ()

    def __post_init__(self):
        time, event = check_times_events(self.time, self.event)
        if time.size < 1:
            raise ValueError("a dataset needs at least one subject")
        X = np.asarray(self.X, dtype=float)
        if X.size == 0:
            X = np.empty((time.size, 0))
        X = check_covariates(X.reshape(time.size, -1), n=time.size)
        names = tuple(self.covariate_names) or tuple(
            f"x{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ValueError(
                f"{len(names)} covariate names for {X.shape[1]} columns")
        for name, arr in (("time", time), ("event", event), ("X", X)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "covariate_names", names)

    @property
    def n(self):
        return self.time.size

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def subjects(self):
        return [ObservedSubject(float(t), bool(d), tuple(x))
                for t, d, x in zip(self.time, self.event, self.X)]

    @classmethod
    def from_subjects(cls, subjects, covariate_names=()):
        subjects = list(subjects)
        time = [s[0] for s in subjects]
        event = [s[1] for s in subjects]
        X = np.array([list(s[2]) if len(s) > 2 else [] for s in subjects],
                     dtype=float)
        return cls(time, event, X.reshape(len(subjects), -1), covariate_names)

    def take(self, idx):
        """Subset (or resample, with repeated indices) the subjects."""
        idx = np.asarray(idx)
        return SurvivalDataset(self.time[idx], self.event[idx], self.X[idx],
                               self.covariate_names)


def distinct_event_times(dataset):
    """Sorted distinct times at which uncensored failures occur."""
    times = np.unique(dataset.time[dataset.event])
    if times.size == 0:
        raise NoEvents("dataset contains no uncensored failures")
    return times


@dataclass(frozen=True, eq=False)
class KaplanMeierCurve:
    event_times: np.ndarray
    survival_values: np.ndarray
    at_risk_counts: np.ndarray
    event_counts: np.ndarray

    def __call__(self, t):
        return km_eval(self, t)


def fit_kaplan_meier(dataset):
    return kaplan_meier(dataset.time, dataset.event)


def kaplan_meier(time, event):
    """Product-limit estimate from raw ``time``/``event`` arrays."""
    time, event = check_times_events(time, event)
    event_times = np.unique(time[event])
    if event_times.size == 0:
        raise NoEvents("dataset contains no uncensored failures")
    sorted_time = np.sort(time)
    # r_m counts O_i >= t_m, so censored ties stay in the risk set
    at_risk = time.size - np.searchsorted(sorted_time, event_times, side="left")
    ev_sorted = np.sort(time[event])
    counts = (np.searchsorted(ev_sorted, event_times, side="right")
              - np.searchsorted(ev_sorted, event_times, side="left"))
    # prod_k (r_k - d_k)/r_k rearranged to telescope: the factors
    # (r_k - d_k)/r_{k+1} are exactly 1 when nobody is censored between event
    # times, so uncensored data gives the empirical fraction in one division
    survivors = (at_risk - counts).astype(float)
    carry = np.concatenate(([1.0], np.cumprod(survivors[:-1] / at_risk[1:])))
    surv = survivors * carry / at_risk[0]
    return KaplanMeierCurve(event_times, surv, at_risk, counts)


def km_eval(curve, t):
    """Evaluate the left-continuous estimate ``P(T >= t)``.

    Scalars in, scalar out; arrays are evaluated elementwise. Past the last
    observation the final product-limit value is carried forward.
    """
    t_arr = np.asarray(t, dtype=float)
    idx = np.searchsorted(curve.event_times, t_arr, side="left")
    padded = np.concatenate(([1.0], curve.survival_values))
    out = padded[idx]
    return float(out) if out.ndim == 0 else out
