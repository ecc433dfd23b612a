"""Simulated censored cohorts with closed-form true survival probabilities.

Three families are available:

``weibull-ph``
    Weibull proportional hazards, ``S(t|x) = exp(-lam * exp(b'x) * t**nu)``.
``loglogistic-aft``
    Log-logistic failure times with scale ``phi`` and shape ``k(x) = exp(b'x)``,
    ``S(t|x) = 1 / (1 + (t/phi)**k(x))``. Equivalently ``log T = log(phi) +
    s(x) * L`` with ``L`` standard logistic and ``s(x) = 1/k(x)``.
``misspecified-ehr``
    Age and systolic blood pressure acting through a non-linear predictor
    ``g`` (threshold at age 60 and interactions) with ``s(x) = exp(g)``.

All families share the censoring scheme ``C = min(10, Uniform(0, 20))``.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import BadRho, UnknownVariant
from .survival import SurvivalDataset

VARIANTS = ("weibull-ph", "loglogistic-aft", "misspecified-ehr")
WEIBULL_LAMBDA = 0.01
WEIBULL_NU = 2.0
LOGLOGISTIC_PHI = 20.0
WEIBULL_BETA = (0.5, 0.0, 0.0, 0.0, 0.0)
LOGLOGISTIC_BETA = (0.5, 0.1, -0.1, 0.0, 0.0)
# coefficients on standardized (age, sbp, age>60, age*sbp, age*(age>60))
MISSPECIFIED_BETA = (-0.2, -0.6, 0.2, -0.2, 0.4)
AGE_SHAPE, AGE_SCALE, AGE_CAP = 10.0, 50.0, 100.0
SBP_BASE, SBP_SD = 130.0, 15.0
HORIZON = 7.0


@dataclass(frozen=True)
class ScenarioConfig:
    variant: str
    n: int = 1000
    beta0: float = 0.0
    rho: float = 0.0
    seed: int = 0
    horizon: float = HORIZON

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise UnknownVariant(
                f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0.0 <= self.rho < 1.0:
            raise BadRho(f"rho must lie in [0, 1), got {self.rho}")


@dataclass(frozen=True, eq=False)
class SimulatedDataset:
    dataset: SurvivalDataset
    true_time: np.ndarray
    censor_time: np.ndarray
    true_surv: np.ndarray
    horizon: float
    config: ScenarioConfig
    params: dict = field(default_factory=dict)

    def true_survival(self, t):
        """True ``P(T >= t | x)`` for every subject, shape ``(n,)``."""
        return _survival_from_params(self.config.variant, self.params, t)


def _streams(seed):
    """Independent (covariate, failure, censoring) seed streams."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return seed.spawn(3)


def gen_correlated_normals(n, p, rho, seed):
    """Standard normal columns with exchangeable pairwise correlation ``rho``."""
    if not 0.0 <= rho < 1.0:
        raise BadRho(f"rho must lie in [0, 1), got {rho}")
    rng = np.random.default_rng(seed)
    shared = rng.standard_normal((n, 1))
    own = rng.standard_normal((n, p))
    return np.sqrt(rho) * shared + np.sqrt(1.0 - rho) * own


def gen_censoring(n, seed):
    rng = np.random.default_rng(seed)
    return np.minimum(10.0, rng.uniform(0.0, 20.0, size=n))


def weibull_survival(eta, t, lam=WEIBULL_LAMBDA, nu=WEIBULL_NU):
    return np.exp(-lam * np.exp(eta) * np.asarray(t, dtype=float) ** nu)


def loglogistic_survival(sigma, t, phi=LOGLOGISTIC_PHI):
    """``1 / (1 + (t/phi)**(1/sigma))`` with ``sigma`` the scale of ``log T``."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        return 1.0 / (1.0 + np.exp(np.log(t / phi) / sigma))


def _survival_from_params(variant, params, t):
    if variant == "weibull-ph":
        return weibull_survival(params["eta"], t)
    if variant in ("loglogistic-aft", "misspecified-ehr"):
        return loglogistic_survival(params["sigma"], t)
    raise UnknownVariant(f"unknown variant {variant!r}")


def misspecified_design(age, sbp):
    """Raw columns of the non-linear predictor."""
    age = np.asarray(age, dtype=float)
    sbp = np.asarray(sbp, dtype=float)
    old = (age > 60).astype(float)
    return np.column_stack([age, sbp, old, age * sbp, age * old])


def true_survival(variant, params, x, t):
    """Closed-form ``P(T >= t | x)`` for one covariate vector.

    ``params`` needs ``beta0`` for the first two families and the design
    column ``mean``/``scale`` for ``misspecified-ehr`` (where ``x`` is raw
    ``(age, sbp)``).
    """
    x = np.asarray(x, dtype=float).ravel()
    if variant == "weibull-ph":
        eta = params["beta0"] + x @ np.asarray(WEIBULL_BETA[:x.size])
        return float(weibull_survival(eta, t))
    if variant == "loglogistic-aft":
        eta = params["beta0"] + x @ np.asarray(LOGLOGISTIC_BETA[:x.size])
        return float(loglogistic_survival(np.exp(-eta), t))
    if variant == "misspecified-ehr":
        d = (misspecified_design(x[0:1], x[1:2])[0] - params["mean"]) / params["scale"]
        return float(loglogistic_survival(np.exp(d @ np.asarray(MISSPECIFIED_BETA)), t))
    raise UnknownVariant(f"unknown variant {variant!r}")


def _finish(config, X, names, T, params, c_rng_seed):
    C = gen_censoring(config.n, c_rng_seed)
    O = np.minimum(T, C)
    delta = T <= C
    data = SurvivalDataset(O, delta, X, names)
    truth = _survival_from_params(config.variant, params, config.horizon)
    return SimulatedDataset(data, T, C, truth, config.horizon, config, params)


def gen_weibull_ph(config, seed=None):
    seed = config.seed if seed is None else seed
    sx, st, sc = _streams(seed)
    X = gen_correlated_normals(config.n, 5, config.rho, sx)
    eta = config.beta0 + X @ np.asarray(WEIBULL_BETA)
    T = weibull_time(np.random.default_rng(st).uniform(size=config.n), eta)
    names = tuple(f"x{j + 1}" for j in range(5))
    return _finish(config, X, names, T, {"eta": eta, "beta0": config.beta0}, sc)


def weibull_time(u, eta, lam=WEIBULL_LAMBDA, nu=WEIBULL_NU):
    """Inverse-CDF draw: ``S(T|x) = u`` for the Weibull PH model."""
    return (-np.log(u) / (lam * np.exp(eta))) ** (1.0 / nu)


def loglogistic_time(v, sigma, phi=LOGLOGISTIC_PHI):
    """``phi * (v / (1 - v))**sigma``, so that ``P(T < t) = v`` at ``t = T``."""
    v = np.asarray(v, dtype=float)
    return phi * np.exp(sigma * (np.log(v) - np.log1p(-v)))


def _loglogistic_times(sigma, rng, phi=LOGLOGISTIC_PHI):
    return loglogistic_time(rng.uniform(size=sigma.size), sigma, phi)


def gen_loglogistic_aft(config, seed=None):
    seed = config.seed if seed is None else seed
    sx, st, sc = _streams(seed)
    X = gen_correlated_normals(config.n, 5, config.rho, sx)
    sigma = np.exp(-(config.beta0 + X @ np.asarray(LOGLOGISTIC_BETA)))
    T = _loglogistic_times(sigma, np.random.default_rng(st))
    names = tuple(f"x{j + 1}" for j in range(5))
    return _finish(config, X, names, T, {"sigma": sigma, "beta0": config.beta0}, sc)


def gen_age_sbp(n, rng):
    v = rng.uniform(size=n)
    age = AGE_SCALE * np.exp((np.log(v) - np.log1p(-v)) / AGE_SHAPE)
    age = np.minimum(age, AGE_CAP)
    dev = age - 50.0
    sbp = rng.normal(SBP_BASE + np.sign(dev) * np.sqrt(np.abs(dev)), SBP_SD)
    return age, sbp


def gen_misspecified(config, seed=None):
    seed = config.seed if seed is None else seed
    sx, st, sc = _streams(seed)
    age, sbp = gen_age_sbp(config.n, np.random.default_rng(sx))
    design = misspecified_design(age, sbp)
    mean = design.mean(axis=0)
    scale = design.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    sigma = np.exp(((design - mean) / scale) @ np.asarray(MISSPECIFIED_BETA))
    T = _loglogistic_times(sigma, np.random.default_rng(st))
    X = np.column_stack([age, sbp])
    params = {"sigma": sigma, "mean": mean, "scale": scale}
    return _finish(config, X, ("age", "sbp"), T, params, sc)


GENERATORS = {
    "weibull-ph": gen_weibull_ph,
    "loglogistic-aft": gen_loglogistic_aft,
    "misspecified-ehr": gen_misspecified,
}


def simulate(config, seed=None):
    """Dispatch to the generator for ``config.variant``."""
    return GENERATORS[config.variant](config, seed)
