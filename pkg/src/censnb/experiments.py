"""Monte-Carlo comparison of the Naive Bayes and Cox models.

Each replicate simulates a training and an equally sized validation cohort,
fits both models on the training data and scores survival predictions at the
horizon against the closed-form truth. Reclassification uses quartiles of
the true event probabilities; positive scores favour Naive Bayes.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cnb import CensoredNaiveBayes
from .cox import CoxPH
from .metrics import bias_mse, nri, quartile_categories
from .simulation import HORIZON, ScenarioConfig, simulate
from .survival import SurvivalDataset

METRICS = ("bias_cph", "bias_nb", "mse_cph", "mse_nb", "ri_e", "ri_ne", "nri")


def _age_sbp(X):
    return X[:, 0], X[:, 1]


def _terms_age_sbp(X):
    return X


def _terms_logage_sbp(X):
    age, sbp = _age_sbp(X)
    return np.column_stack([np.log(age), sbp])


def _terms_interaction(X):
    age, sbp = _age_sbp(X)
    return np.column_stack([age, sbp, age * sbp])


def _terms_quadratic(X):
    age, sbp = _age_sbp(X)
    return np.column_stack([age, sbp, age ** 2])


def _terms_threshold(X):
    age, sbp = _age_sbp(X)
    return np.column_stack([age, sbp, (age > 60).astype(float)])


def _terms_all(X):
    age, sbp = _age_sbp(X)
    old = (age > 60).astype(float)
    return np.column_stack([age, sbp, old, age * sbp, age * old])


# Cox linear predictors for the misspecification study, mildest first
COX_TERMS = {
    "Age, SBP": _terms_age_sbp,
    "log(Age), SBP": _terms_logage_sbp,
    "Age, SBP, Age x SBP": _terms_interaction,
    "Age, SBP, (Age^2)": _terms_quadratic,
    "Age, SBP, (Age>60)": _terms_threshold,
    "All": _terms_all,
}


@dataclass(frozen=True)
class CnbRecipe:
    """Fit Naive Bayes on ``train`` and return event probabilities on ``test``."""

    span: float = 0.75
    degree: int = 1
    standardize: bool = True
    grid_cap: int = 1000

    def __call__(self, train, test, horizon):
        model = CensoredNaiveBayes(span=self.span, degree=self.degree,
                                   standardize=self.standardize,
                                   grid_cap=self.grid_cap)
        model.fit(train.X, (train.time, train.event))
        return model.predict_event_probability(test.X, horizon)


@dataclass(frozen=True)
class CoxRecipe:
    terms: str = None
    standardize: bool = True

    def design(self, X):
        return np.asarray(X, dtype=float) if self.terms is None else COX_TERMS[self.terms](X)

    def __call__(self, train, test, horizon):
        model = CoxPH(standardize=self.standardize)
        model.fit(self.design(train.X), (train.time, train.event))
        return model.predict_event_probability(self.design(test.X), horizon)


@dataclass(frozen=True)
class TableRow:
    table: int
    index: int
    variant: str
    n: int
    beta0: float = 0.0
    rho: float = 0.0
    cox_terms: str = None

    def label(self):
        if self.cox_terms is not None:
            return {"cox_terms": self.cox_terms}
        return {"n": self.n, "beta0": self.beta0, "rho": self.rho}


def table_rows(table):
    if table == 1:
        grid = [(n, b, r) for n in (1000, 5000) for b in (0, -1, -2) for r in (0.0, 0.7)]
        return [TableRow(1, i, "weibull-ph", n, b, r) for i, (n, b, r) in enumerate(grid)]
    if table == 2:
        grid = [(n, b, r) for n in (1000, 5000) for b in (1, 0, -1) for r in (0.0, 0.7)]
        return [TableRow(2, i, "loglogistic-aft", n, b, r) for i, (n, b, r) in enumerate(grid)]
    if table == 3:
        return [TableRow(3, i, "misspecified-ehr", 5000, cox_terms=name)
                for i, name in enumerate(COX_TERMS)]
    raise ValueError(f"table must be 1, 2 or 3, got {table}")


def _seed(seed, row, rep, split):
    # table 3 rows share their simulated cohorts, so the row index is dropped
    row_key = 0 if row.table == 3 else row.index
    return np.random.SeedSequence([int(seed), row.table, row_key, rep, split])


def _score(pred_nb, pred_cox, validation, horizon):
    truth = validation.true_surv
    nb = bias_mse(pred_nb, truth)
    cox = bias_mse(pred_cox, truth)
    cats = quartile_categories(1.0 - truth)
    events = validation.true_time < horizon
    rec = nri(events, cats.categorize(1.0 - pred_nb), cats.categorize(1.0 - pred_cox))
    return {"bias_cph": cox.bias, "bias_nb": nb.bias, "mse_cph": cox.mse_x100,
            "mse_nb": nb.mse_x100, "ri_e": rec.ri_events,
            "ri_ne": rec.ri_nonevents, "nri": rec.nri}


def run_replicate(rows, rep, seed, horizon=HORIZON, cnb=CnbRecipe()):
    """One replicate for a group of rows sharing the same simulated cohorts.

    Returns ``{row.index: metrics dict or error string}``.
    """
    first = rows[0]
    out = {}
    try:
        cohorts = [simulate(ScenarioConfig(first.variant, first.n, first.beta0,
                                           first.rho, 0, horizon),
                            seed=_seed(seed, first, rep, split))
                   for split in (0, 1)]
        train, valid = cohorts[0].dataset, cohorts[1]
        pred_nb = 1.0 - cnb(train, valid.dataset, horizon)
    except Exception as exc:  # noqa: BLE001 - counted as a failed replicate
        return {row.index: f"{type(exc).__name__}: {exc}" for row in rows}
    for row in rows:
        try:
            pred_cox = 1.0 - CoxRecipe(row.cox_terms)(train, valid.dataset, horizon)
            out[row.index] = _score(pred_nb, pred_cox, valid, horizon)
        except Exception as exc:  # noqa: BLE001
            out[row.index] = f"{type(exc).__name__}: {exc}"
    return out


def _job(args):
    rows, rep, seed, horizon = args
    return run_replicate(rows, rep, seed, horizon)


def default_workers():
    env = os.environ.get("CENSURV_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def reproduce_table(table, reps=100, seed=0, rows=None, horizon=HORIZON,
                    workers=1, progress=None):
    """Mean and Monte-Carlo standard error of every metric per table row.

    Results depend only on ``(table, row, rep, seed)``, never on ``workers``.
    """
    if reps < 2:
        raise ValueError("reps must be at least 2")
    rows = list(rows) if rows is not None else table_rows(table)
    groups = [rows] if table == 3 else [[row] for row in rows]
    jobs = [(group, rep, seed, horizon) for group in groups for rep in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_job, jobs, chunksize=1))
    else:
        results = []
        for job in jobs:
            results.append(_job(job))
            if progress is not None:
                progress(len(results), len(jobs))
    collected = {row.index: [] for row in rows}
    failures = {row.index: [] for row in rows}
    for res in results:
        for idx, value in res.items():
            (collected if isinstance(value, dict) else failures)[idx].append(value)
    summary = []
    for row in rows:
        ok = collected[row.index]
        entry = dict(row.label())
        for name in METRICS:
            vals = np.array([r[name] for r in ok], dtype=float)
            entry[name] = float(vals.mean()) if vals.size else math.nan
            entry[f"{name}_se"] = (float(vals.std(ddof=1) / math.sqrt(vals.size))
                                   if vals.size > 1 else math.nan)
        entry["reps_ok"] = len(ok)
        entry["reps_failed"] = len(failures[row.index])
        summary.append(entry)
    return summary


def ehr_split(n=5000, seed=0, train_fraction=0.75):
    """Simulated misspecified cohort split at random into train and test sets."""
    sim = simulate(ScenarioConfig("misspecified-ehr", n=n, seed=seed))
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 99]))
    perm = rng.permutation(n)
    cut = int(round(train_fraction * n))
    return sim, sim.dataset.take(np.sort(perm[:cut])), sim.dataset.take(np.sort(perm[cut:]))


__all__ = ["CnbRecipe", "CoxRecipe", "COX_TERMS", "METRICS", "TableRow",
           "table_rows", "run_replicate", "reproduce_table", "ehr_split",
           "default_workers", "SurvivalDataset"]
