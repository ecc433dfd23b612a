"""Censored Naive Bayes estimate of the conditional survivor function.

By Bayes' theorem and conditional independence of covariates given
``{T >= t}`` and ``{T < t}``::

    S_x(t) = S(t) prod_j f_j(x_j | T >= t)
             / [S(t) prod_j f_j(x_j | T >= t) + (1 - S(t)) prod_j f_j(x_j | T < t)]

``S`` is the Kaplan-Meier curve and each ``f_j`` is a Normal density whose
mean and variance are smoothed functions of ``t``. Evaluation happens in the
log domain, which avoids underflow of the density products for large ``p``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_covariates, check_survival_target
from .covariates import (LoessConfig, SmoothedMomentCurves, _moments_from_arrays,
                         normal_logpdf, smooth_moments, thin_grid)
from .exceptions import DimensionMismatch
from .preprocessing import StandardizationParams
from .survival import KaplanMeierCurve, SurvivalDataset, kaplan_meier, km_eval


@dataclass(frozen=True, eq=False)
class CnbModel:
    km: KaplanMeierCurve
    curves: tuple
    grid: np.ndarray
    loess_config: LoessConfig
    standardization: StandardizationParams = None
    covariate_names: tuple = ()

    @property
    def p(self):
        return len(self.curves)


def _fit_curves(time, event, Z, grid, config, n_jobs):
    moments = _moments_from_arrays(time, event, Z, grid)
    if n_jobs and n_jobs > 1 and len(moments) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return tuple(pool.map(lambda m: smooth_moments(m, config), moments))
    return tuple(smooth_moments(m, config) for m in moments)


def fit_cnb(dataset, loess_config=LoessConfig(), standardize=True,
            grid_cap=1000, n_jobs=None):
    """Fit the model on a :class:`SurvivalDataset`."""
    km = kaplan_meier(dataset.time, dataset.event)
    std = StandardizationParams.fit(dataset.X) if standardize else None
    Z = std.transform(dataset.X) if std is not None else np.asarray(dataset.X)
    grid = thin_grid(km.event_times, grid_cap)
    curves = _fit_curves(dataset.time, dataset.event, Z, grid, loess_config,
                         n_jobs)
    return CnbModel(km, curves, grid, loess_config, std,
                    tuple(dataset.covariate_names))


def _log_ratio(model, Z, t):
    """``sum_j log f_j(>=) - log f_j(<)`` for every row of ``Z`` at time ``t``."""
    total = np.zeros(Z.shape[0])
    for j, curves in enumerate(model.curves):
        mu, sigma2, theta, psi2 = curves.evaluate(t)
        total += (normal_logpdf(Z[:, j], mu, sigma2)
                  - normal_logpdf(Z[:, j], theta, psi2))
    return total


def _predict_matrix(model, X, times):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.p:
        raise DimensionMismatch(
            f"expected an (n, {model.p}) covariate matrix, got shape {X.shape}")
    X = check_covariates(X)
    Z = model.standardization.transform(X) if model.standardization is not None else X
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or not np.all(np.isfinite(times)):
        raise ValueError("prediction times must be finite and nonnegative")
    out = np.empty((Z.shape[0], times.size))
    for col, t in enumerate(times):
        s = km_eval(model.km, t)
        if s >= 1.0:
            out[:, col] = 1.0
            continue
        if s <= 0.0 or model.p == 0:
            # with no covariates both density products are empty
            out[:, col] = s
            continue
        logit_s = np.log(s) - np.log1p(-s)
        out[:, col] = expit(logit_s + _log_ratio(model, Z, t))
    return np.clip(out, 0.0, 1.0)


def predict_survival(model, x, t):
    """``P(T >= t | x)`` for a single covariate vector."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != model.p:
        raise DimensionMismatch(f"expected {model.p} covariates, got {x.size}")
    return float(_predict_matrix(model, x.reshape(1, -1), [t])[0, 0])


def predict_curve(model, x, times):
    x = np.asarray(x, dtype=float).ravel()
    if x.size != model.p:
        raise DimensionMismatch(f"expected {model.p} covariates, got {x.size}")
    return _predict_matrix(model, x.reshape(1, -1), np.ravel(times))[0]


def _as_matrix(X, n, p=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        return X
    if p == 0 or X.size == 0:
        return np.empty((n if n is not None else max(X.shape[0], 1), 0))
    return X.reshape(-1, 1) if p in (None, 1) else X.reshape(-1, p)


class CensoredNaiveBayes(BaseEstimator):
    """Naive Bayes survival model for right-censored data.

    Parameters
    ----------
    span, degree, variance_floor : loess settings for the moment curves.
    standardize : bool
        Center and scale covariates with training statistics before fitting.
    grid_cap : int or None
        Maximum number of event times used as the smoothing grid.
    n_jobs : int or None
        Threads used to smooth covariates in parallel.
    """

    def __init__(self, span=0.75, degree=1, variance_floor=1e-6,
                 standardize=True, grid_cap=1000, n_jobs=None):
        self.span = span
        self.degree = degree
        self.variance_floor = variance_floor
        self.standardize = standardize
        self.grid_cap = grid_cap
        self.n_jobs = n_jobs

    def fit(self, X, y):
        time, event = check_survival_target(y)
        names = tuple(str(c) for c in getattr(X, "columns", ()))
        X = _as_matrix(X, time.size)
        dataset = SurvivalDataset(time, event, X, names)
        config = LoessConfig(self.span, self.degree, self.variance_floor)
        self.model_ = fit_cnb(dataset, config, self.standardize, self.grid_cap,
                              self.n_jobs)
        self.n_features_in_ = dataset.p
        return self

    def predict_survival(self, X, times):
        """Survival probabilities, shape ``(n_samples, len(times))``.

        A scalar ``times`` returns a 1-d array of length ``n_samples``.
        """
        check_is_fitted(self, "model_")
        scalar = np.ndim(times) == 0
        X = _as_matrix(X, None, self.n_features_in_)
        out = _predict_matrix(self.model_, X, np.atleast_1d(times))
        return out[:, 0] if scalar else out

    def predict_event_probability(self, X, horizon):
        return 1.0 - self.predict_survival(X, horizon)
