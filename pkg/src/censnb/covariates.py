"""Conditional covariate moments at event times and their weighted smoothing.

For each covariate ``j`` and grid time ``t_k`` four moments are estimated:
mean/variance among subjects still at risk (``O_i >= t_k``) and mean/variance
among subjects with an observed failure before ``t_k`` (``delta_i = 1`` and
``O_i < t_k``). Each series is smoothed over time by a precision-weighted
loess fit and read back by linear interpolation.
"""

import math
from dataclasses import dataclass

import numba
import numpy as np

from .exceptions import BadIndex, InsufficientData

MOMENT_NAMES = ("mu", "sigma2", "theta", "psi2")
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class LoessConfig:
    span: float = 0.75
    degree: int = 1
    variance_floor: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.span <= 1.0:
            raise ValueError(f"span must lie in (0, 1], got {self.span}")
        if self.degree not in (1, 2):
            raise ValueError(f"degree must be 1 or 2, got {self.degree}")
        if not self.variance_floor > 0.0:
            raise ValueError("variance_floor must be positive")


@dataclass(frozen=True, eq=False)
class MomentEstimates:
    covariate_index: int
    times: np.ndarray
    mu_hat: np.ndarray
    sigma2_hat: np.ndarray
    theta_hat: np.ndarray
    psi2_hat: np.ndarray
    riskset_sizes: np.ndarray
    failure_counts: np.ndarray

    def series(self, target):
        return getattr(self, f"{target}_hat")

    def counts_for(self, target):
        return self.riskset_sizes if target in ("mu", "sigma2") else self.failure_counts


def _conditional_moments(time, event, X, grid):
    """Risk-set and prior-failure means/variances for every column of ``X``.

    Returns ``(n_geq, n_lt, mu, sigma2, theta, psi2)``; the moment arrays are
    shaped ``(len(grid), p)``. Zero-denominator cells get the fallback
    constants 0 (means) and 1 (variances).
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    grid = np.asarray(grid, dtype=float)
    # centering first keeps E[X^2] - E[X]^2 from cancelling badly
    shift = X.mean(axis=0) if n else np.zeros(p)
    Xc = X - shift

    order = np.argsort(time, kind="stable")
    t_sorted = time[order]
    prefix1 = np.vstack([np.zeros(p), np.cumsum(Xc[order], axis=0)])
    prefix2 = np.vstack([np.zeros(p), np.cumsum(Xc[order] ** 2, axis=0)])
    first_at_risk = np.searchsorted(t_sorted, grid, side="left")
    n_geq = n - first_at_risk
    s1_geq = prefix1[-1] - prefix1[first_at_risk]
    s2_geq = prefix2[-1] - prefix2[first_at_risk]

    ev_idx = order[event[order]]
    ev_times = time[ev_idx]
    ev_prefix1 = np.vstack([np.zeros(p), np.cumsum(Xc[ev_idx], axis=0)])
    ev_prefix2 = np.vstack([np.zeros(p), np.cumsum(Xc[ev_idx] ** 2, axis=0)])
    n_before = np.searchsorted(ev_times, grid, side="left")
    s1_lt = ev_prefix1[n_before]
    s2_lt = ev_prefix2[n_before]

    def finish(count, s1, s2):
        has = count > 0
        denom = np.where(has, count, 1)[:, None]
        mean_c = s1 / denom
        var = np.maximum(s2 / denom - mean_c ** 2, 0.0)
        mean = np.where(has[:, None], mean_c + shift, 0.0)
        var = np.where(has[:, None], var, 1.0)
        return mean, var

    mu, sigma2 = finish(n_geq, s1_geq, s2_geq)
    theta, psi2 = finish(n_before, s1_lt, s2_lt)
    return n_geq, n_before, mu, sigma2, theta, psi2


def estimate_moments(dataset, j, times):
    """Moment estimates for covariate ``j`` on the grid ``times``."""
    if not 0 <= j < dataset.p:
        raise BadIndex(f"covariate index {j} out of range for p={dataset.p}")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) <= 0):
        raise ValueError("grid times must be strictly increasing")
    return _moments_from_arrays(dataset.time, dataset.event,
                                dataset.X[:, j:j + 1], times, j)[0]


def _moments_from_arrays(time, event, X, grid, first_index=0):
    n_geq, n_lt, mu, sigma2, theta, psi2 = _conditional_moments(
        time, event, X, grid)
    return [MomentEstimates(first_index + j, grid, mu[:, j], sigma2[:, j],
                            theta[:, j], psi2[:, j], n_geq, n_lt)
            for j in range(X.shape[1])]


def precision_weights(moments, target):
    """Inverse-variance weights for one moment series.

    Means get ``n_k / s2_k``; variances get ``(n_k - 1) / (2 s2_k**2)``.
    ``s2_k`` is the variance estimate from the same subject set.
    """
    if target not in MOMENT_NAMES:
        raise ValueError(f"unknown moment series {target!r}")
    n = np.asarray(moments.counts_for(target), dtype=float)
    s2 = moments.sigma2_hat if target in ("mu", "sigma2") else moments.psi2_hat
    s2 = np.asarray(s2, dtype=float)
    ok = (n > 0) & (s2 > 0)
    if target in ("sigma2", "psi2"):
        ok &= n > 1
        raw = (n - 1.0) / (2.0 * np.where(ok, s2, 1.0) ** 2)
    else:
        raw = n / np.where(ok, s2, 1.0)
    return np.where(ok, raw, 0.0)


def fit_weighted_loess(xs, ys, ws, config=LoessConfig()):
    """Locally weighted polynomial fit evaluated at every ``xs`` point.

    The neighbourhood of each point is the ``ceil(span * m)`` nearest of the
    ``m`` positively weighted points; local weights are tricube kernel values
    times ``ws``. Zero-weight points still receive fitted values.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    ws = np.asarray(ws, dtype=float)
    if not (xs.shape == ys.shape == ws.shape) or xs.ndim != 1:
        raise ValueError("xs, ys and ws must be 1-d arrays of equal length")
    if np.any(ws < 0) or not np.all(np.isfinite(ws)):
        raise ValueError("weights must be finite and nonnegative")
    d = config.degree
    pos = ws > 0
    m = int(pos.sum())
    if m < d + 2:
        raise InsufficientData(
            f"{m} positively weighted points; degree {d} loess needs {d + 2}")
    order = np.argsort(xs[pos], kind="stable")
    xp, yp, wp = xs[pos][order], ys[pos][order], ws[pos][order]
    wp = wp / wp.max()
    q = min(m, max(math.ceil(config.span * m), d + 2))
    sums, rhs = _local_sums(xs, xp, yp, wp, q, d)
    A = np.stack([sums[:, i:i + d + 1] for i in range(d + 1)], axis=1)
    return _solve_intercepts(A, rhs)


@numba.njit(cache=True)
def _local_sums(x0s, xp, yp, wp, q, d):
    """Weighted power sums over each point's ``q`` nearest neighbours.

    For target ``x0`` with bandwidth ``h`` (distance to the q-th nearest
    point) and ``u = (x - x0) / h``, returns ``sum w K(u) u**k`` for
    ``k = 0..2d`` and ``sum w K(u) u**k y`` for ``k = 0..d``, normalised by
    the total local weight. ``K`` is the tricube kernel.
    """
    m = xp.size
    sums = np.zeros((x0s.size, 2 * d + 1))
    rhs = np.zeros((x0s.size, d + 1))
    for r in range(x0s.size):
        x0 = x0s[r]
        hi = np.searchsorted(xp, x0)
        lo = hi - 1
        # grow the window [lo + 1, hi) to q points, nearest first
        for _ in range(q):
            if lo < 0:
                hi += 1
            elif hi >= m:
                lo -= 1
            elif x0 - xp[lo] <= xp[hi] - x0:
                lo -= 1
            else:
                hi += 1
        left = lo + 1
        h = max(x0 - xp[left], xp[hi - 1] - x0)
        if h <= 0.0:
            h = 1.0
        total = 0.0
        for i in range(left, hi):
            u = (xp[i] - x0) / h
            a = abs(u)
            if a >= 1.0:
                continue
            k = 1.0 - a * a * a
            k = k * k * k * wp[i]
            total += k
            term = k
            for j in range(2 * d + 1):
                sums[r, j] += term
                if j <= d:
                    rhs[r, j] += term * yp[i]
                term *= u
        if total > 0.0:
            for j in range(2 * d + 1):
                sums[r, j] /= total
            for j in range(d + 1):
                rhs[r, j] /= total
    return sums, rhs


def _solve_intercepts(A, b):
    try:
        sol = np.linalg.solve(A, b[..., None])[..., 0]
        if np.all(np.isfinite(sol)):
            return sol[:, 0]
    except np.linalg.LinAlgError:
        pass
    # rank-deficient neighbourhoods: minimum-norm local fit
    return np.array([np.linalg.lstsq(a, v, rcond=None)[0][0]
                     for a, v in zip(A, b)])


@dataclass(frozen=True, eq=False)
class SmoothedMomentCurves:
    """Fitted moment curves on the grid, interpolated linearly in between."""

    covariate_index: int
    grid: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray
    theta: np.ndarray
    psi2: np.ndarray
    variance_floor: float = LoessConfig.variance_floor

    def evaluate(self, t):
        """``(mu, sigma2, theta, psi2)`` at ``t``; flat outside the grid."""
        return tuple(np.interp(t, self.grid, getattr(self, name))
                     for name in MOMENT_NAMES)


def _smooth_series(moments, target, config):
    ys = moments.series(target)
    ws = precision_weights(moments, target)
    if np.count_nonzero(ws) < config.degree + 2:
        informative = moments.counts_for(target) > 0
        vals = ys[informative]
        # a covariate that is constant within every informative subject set
        # has zero-variance weights everywhere; its curve is that constant
        if vals.size and np.ptp(vals) == 0.0:
            return np.full_like(ys, vals[0])
        raise InsufficientData(
            f"covariate {moments.covariate_index}: too few usable grid points "
            f"for the {target} curve")
    return fit_weighted_loess(moments.times, ys, ws, config)


def smooth_moments(moments, config=LoessConfig()):
    fits = {name: _smooth_series(moments, name, config) for name in MOMENT_NAMES}
    floor = config.variance_floor
    return SmoothedMomentCurves(
        moments.covariate_index, np.asarray(moments.times, dtype=float),
        fits["mu"], np.maximum(fits["sigma2"], floor),
        fits["theta"], np.maximum(fits["psi2"], floor), floor)


def normal_logpdf(x, mean, var):
    return -0.5 * (_LOG_2PI + np.log(var) + (x - mean) ** 2 / var)


def conditional_density(curves, branch, x, t):
    """Normal density of covariate value ``x`` given ``T >= t`` or ``T < t``."""
    mu, sigma2, theta, psi2 = curves.evaluate(t)
    if branch == "geq":
        mean, var = mu, sigma2
    elif branch == "lt":
        mean, var = theta, psi2
    else:
        raise ValueError(f"branch must be 'geq' or 'lt', got {branch!r}")
    return np.exp(normal_logpdf(np.asarray(x, dtype=float), mean, var))


def thin_grid(event_times, cap):
    """Keep at most ``cap`` event times, spaced evenly in rank."""
    event_times = np.asarray(event_times, dtype=float)
    if cap is None or event_times.size <= cap:
        return event_times
    keep = np.unique(np.round(np.linspace(0, event_times.size - 1, cap)).astype(int))
    return event_times[keep]
