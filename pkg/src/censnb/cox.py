"""Cox proportional-hazards comparator with Breslow ties and baseline."""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_covariates, check_survival_target
from .exceptions import DimensionMismatch, NoEvents, NotConverged, SingularInformation
from .preprocessing import StandardizationParams
from .survival import SurvivalDataset


@dataclass(frozen=True, eq=False)
class CoxModel:
    beta: np.ndarray
    baseline_times: np.ndarray
    baseline_cumhaz: np.ndarray
    standardization: StandardizationParams = None
    iterations: int = 0
    grad_norm: float = 0.0
    loglik: float = float("nan")
    information: np.ndarray = None
    covariate_names: tuple = ()
    loglik_trace: tuple = ()

    @property
    def p(self):
        return self.beta.size

    @property
    def coef(self):
        """Log hazard ratios per unit of the raw covariates."""
        if self.standardization is None:
            return self.beta
        return self.beta / self.standardization.scale

    def cumulative_baseline_hazard(self, t):
        """Breslow estimate summed over event times ``t_m <= t``."""
        idx = np.searchsorted(self.baseline_times, np.asarray(t, dtype=float),
                              side="right")
        out = np.concatenate(([0.0], self.baseline_cumhaz))[idx]
        return float(out) if out.ndim == 0 else out


class _RiskSets:
    """Reverse-time cumulative sums needed by the partial likelihood."""

    def __init__(self, time, event, Z):
        self.order = np.argsort(-time, kind="stable")
        self.Z = Z[self.order]
        t_desc = time[self.order]
        self.event = event[self.order]
        asc = np.sort(time)
        # position of the last subject still at risk at each subject's time
        self.end = time.size - np.searchsorted(asc, t_desc, side="left") - 1
        self.time = t_desc

    def stats(self, beta, second=True):
        eta = self.Z @ beta
        shift = eta.max() if eta.size else 0.0
        w = np.exp(eta - shift)
        s0 = np.cumsum(w)[self.end]
        s1 = np.cumsum(w[:, None] * self.Z, axis=0)[self.end]
        ev = self.event
        loglik = float(np.sum(eta[ev] - shift - np.log(s0[ev])))
        zbar = s1[ev] / s0[ev, None]
        grad = (self.Z[ev] - zbar).sum(axis=0)
        if not second:
            return loglik, grad, None
        outer = w[:, None, None] * self.Z[:, :, None] * self.Z[:, None, :]
        s2 = np.cumsum(outer, axis=0)[self.end]
        info = (s2[ev] / s0[ev, None, None]).sum(axis=0) - zbar.T @ zbar
        return loglik, grad, info


def partial_loglik(time, event, Z, beta):
    """Breslow partial log-likelihood at ``beta``."""
    return _RiskSets(np.asarray(time, float), np.asarray(event, bool),
                     np.asarray(Z, float).reshape(len(time), -1)).stats(
        np.atleast_1d(np.asarray(beta, float)), second=False)[0]


def _check_information(info):
    if info.size == 0:
        return
    eig = np.linalg.eigvalsh(info)
    if eig[0] <= 1e-10 * max(eig[-1], 1e-300):
        raise SingularInformation(
            "information matrix is singular: covariates are collinear or "
            "constant on the event risk sets")


def breslow_baseline(time, event, Z, beta):
    """Distinct event times and the cumulative baseline hazard at each."""
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    eta = np.asarray(Z, float).reshape(time.size, -1) @ np.asarray(beta, float)
    ev_times, counts = np.unique(time[event], return_counts=True)
    order = np.argsort(time)
    w_sorted = np.exp(eta[order])
    suffix = np.concatenate((np.cumsum(w_sorted[::-1])[::-1], [0.0]))
    s0 = suffix[np.searchsorted(time[order], ev_times, side="left")]
    return ev_times, np.cumsum(counts / s0)


def fit_cox(dataset, tolerance=1e-8, max_iter=100, standardize=True):
    """Maximize the partial likelihood by damped Newton steps from ``beta = 0``."""
    time, event = dataset.time, dataset.event
    if not np.any(event):
        raise NoEvents("dataset contains no uncensored failures")
    X = np.asarray(dataset.X, dtype=float)
    std = StandardizationParams.fit(X) if standardize else None
    Z = std.transform(X) if std is not None else X
    p = Z.shape[1]
    beta = np.zeros(p)
    risk = _RiskSets(time, event, Z)
    loglik, grad, info = risk.stats(beta)
    _check_information(info)
    iterations = 0
    trace = [loglik]
    while p and np.max(np.abs(grad)) >= tolerance:
        if iterations >= max_iter:
            raise NotConverged(
                f"Newton iterations exceeded max_iter={max_iter}; "
                f"gradient max-norm {np.max(np.abs(grad)):.3g}")
        iterations += 1
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError as exc:
            raise SingularInformation("information matrix became singular") from exc
        for _ in range(60):
            cand = beta + step
            c_loglik, c_grad, c_info = risk.stats(cand)
            if np.isfinite(c_loglik) and c_loglik >= loglik - 1e-12 * abs(loglik):
                break
            step = step / 2.0
        else:
            raise NotConverged("step halving failed to increase the partial likelihood")
        beta, loglik, grad, info = cand, c_loglik, c_grad, c_info
        trace.append(loglik)
    times, cumhaz = breslow_baseline(time, event, Z, beta)
    return CoxModel(beta, times, cumhaz, std, iterations,
                    float(np.max(np.abs(grad))) if p else 0.0, loglik, info,
                    tuple(dataset.covariate_names), tuple(trace))


def cox_linear_predictor(model, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.p:
        raise DimensionMismatch(
            f"expected an (n, {model.p}) covariate matrix, got shape {X.shape}")
    X = check_covariates(X)
    Z = model.standardization.transform(X) if model.standardization is not None else X
    return Z @ model.beta


def cox_predict_survival(model, x, t):
    x = np.asarray(x, dtype=float).ravel()
    if x.size != model.p:
        raise DimensionMismatch(f"expected {model.p} covariates, got {x.size}")
    eta = cox_linear_predictor(model, x.reshape(1, -1))[0]
    return float(np.exp(-model.cumulative_baseline_hazard(t) * np.exp(eta)))


class CoxPH(BaseEstimator):
    """Cox proportional-hazards regression (Breslow ties)."""

    def __init__(self, tolerance=1e-8, max_iter=100, standardize=True):
        self.tolerance = tolerance
        self.max_iter = max_iter
        self.standardize = standardize

    def fit(self, X, y):
        time, event = check_survival_target(y)
        names = tuple(str(c) for c in getattr(X, "columns", ()))
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        self.model_ = fit_cox(SurvivalDataset(time, event, X, names),
                              self.tolerance, self.max_iter, self.standardize)
        self.coef_ = self.model_.coef
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        """Linear predictor ``beta'x`` (risk score)."""
        check_is_fitted(self, "model_")
        return cox_linear_predictor(self.model_, _matrix(X, self.n_features_in_))

    def predict_survival(self, X, times):
        check_is_fitted(self, "model_")
        scalar = np.ndim(times) == 0
        eta = cox_linear_predictor(self.model_, _matrix(X, self.n_features_in_))
        H = self.model_.cumulative_baseline_hazard(np.atleast_1d(times))
        out = np.exp(-np.outer(np.exp(eta), H))
        return out[:, 0] if scalar else out

    def predict_event_probability(self, X, horizon):
        return 1.0 - self.predict_survival(X, horizon)


def _matrix(X, p):
    X = np.asarray(X, dtype=float)
    return X.reshape(-1, p) if X.ndim == 1 else X
