"""Calibration and reclassification metrics.

Risk categories are ordered by event probability. Model A is always the
first argument, so positive reclassification scores favour model A.
"""

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import EmptySubsetKM, LengthMismatch, NoEvents, NoNonEvents, TooFew
from .survival import kaplan_meier, km_eval

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CalibrationReport:
    bias: float
    mse_x100: float


def bias_mse(predicted, truth):
    predicted = np.asarray(predicted, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if predicted.size != truth.size:
        raise LengthMismatch(f"{predicted.size} predictions vs {truth.size} truths")
    if predicted.size == 0:
        raise TooFew("need at least one prediction")
    diff = predicted - truth
    return CalibrationReport(float(diff.mean()), float(100.0 * np.mean(diff ** 2)))


@dataclass(frozen=True, eq=False)
class RiskCategories:
    """Cutpoints on the event-probability scale.

    Bin ``k`` holds probabilities in ``(c_{k-1}, c_k]``; a degenerate set of
    equal cutpoints maps a tied value to bin 0.
    """

    cutpoints: np.ndarray

    def __post_init__(self):
        cuts = np.asarray(self.cutpoints, dtype=float).ravel()
        if np.any(np.diff(cuts) < 0):
            raise ValueError("cutpoints must be non-decreasing")
        object.__setattr__(self, "cutpoints", cuts)

    @classmethod
    def clinical(cls, cutpoints=(0.05, 0.10)):
        cuts = np.asarray(cutpoints, dtype=float)
        if np.any(np.diff(cuts) <= 0) or np.any((cuts <= 0) | (cuts >= 1)):
            raise ValueError("cutpoints must be strictly increasing inside (0, 1)")
        return cls(cuts)

    @property
    def n_bins(self):
        return self.cutpoints.size + 1

    def categorize(self, probs):
        return np.searchsorted(self.cutpoints, np.asarray(probs, dtype=float),
                               side="left")


def quartile_categories(true_probs):
    true_probs = np.asarray(true_probs, dtype=float).ravel()
    if true_probs.size < 4:
        raise TooFew(f"quartiles need at least 4 values, got {true_probs.size}")
    return RiskCategories(np.quantile(true_probs, [0.25, 0.5, 0.75]))


@dataclass(frozen=True)
class ReclassificationReport:
    ri_events: float
    ri_nonevents: float
    nri: float
    events_up: float = 0.0
    events_down: float = 0.0
    nonevents_up: float = 0.0
    nonevents_down: float = 0.0
    n_events: float = 0.0
    n_nonevents: float = 0.0
    ci_halfwidth: dict = None
    b_effective: int = None
    failed_replicates: int = 0
    notes: tuple = field(default=())

    def rows(self):
        """``(metric, value, ci_low, ci_high)`` tuples for CSV output."""
        out = []
        for name in ("ri_events", "ri_nonevents", "nri"):
            value = getattr(self, name)
            hw = (self.ci_halfwidth or {}).get(name)
            lo, hi = (value - hw, value + hw) if hw is not None else (None, None)
            out.append((name, value, lo, hi))
        return out


def _report(e_up, e_down, ne_up, ne_down, n_e, n_ne, notes=()):
    ri_e = (e_up - e_down) / n_e
    ri_ne = (ne_down - ne_up) / n_ne
    return ReclassificationReport(float(ri_e), float(ri_ne), float(ri_e + ri_ne),
                                  float(e_up), float(e_down), float(ne_up),
                                  float(ne_down), float(n_e), float(n_ne),
                                  notes=tuple(notes))


def nri(event_flags, bins_a, bins_b):
    """Category-based net reclassification improvement of model A over B."""
    events = np.asarray(event_flags, dtype=bool).ravel()
    bins_a = np.asarray(bins_a).ravel()
    bins_b = np.asarray(bins_b).ravel()
    if not events.size == bins_a.size == bins_b.size:
        raise LengthMismatch("event flags and both binnings must align")
    n_e = int(events.sum())
    n_ne = events.size - n_e
    if n_e == 0:
        raise NoEvents("no events among the evaluated subjects")
    if n_ne == 0:
        raise NoNonEvents("no non-events among the evaluated subjects")
    up = bins_a > bins_b
    down = bins_a < bins_b
    return _report(np.sum(up & events), np.sum(down & events),
                   np.sum(up & ~events), np.sum(down & ~events), n_e, n_ne)


def _expected_events(time, event, mask, horizon):
    """``|subset| * (1 - KM_subset(horizon))``; 0 for eventless subsets."""
    if not np.any(event[mask]):
        return 0.0
    km = kaplan_meier(time[mask], event[mask])
    return int(mask.sum()) * (1.0 - km_eval(km, horizon))


def cnri(test, preds_a, preds_b, categories, horizon):
    """Censoring-adjusted NRI.

    ``preds_a``/``preds_b`` are event probabilities by ``horizon``. Expected
    event counts overall and among up/down-classified subjects come from
    Kaplan-Meier curves fitted within each subset.
    """
    preds_a = np.asarray(preds_a, dtype=float).ravel()
    preds_b = np.asarray(preds_b, dtype=float).ravel()
    if not preds_a.size == preds_b.size == test.n:
        raise LengthMismatch(
            f"{preds_a.size}/{preds_b.size} predictions for {test.n} test subjects")
    time, event = test.time, test.event
    bins_a = categories.categorize(preds_a)
    bins_b = categories.categorize(preds_b)
    up = bins_a > bins_b
    down = bins_a < bins_b
    notes = []
    everyone = np.ones(test.n, dtype=bool)
    n_e = _expected_events(time, event, everyone, horizon)
    n_ne = test.n - n_e
    if n_e <= 0:
        raise NoEvents("no expected events by the horizon in the test set")
    if n_ne <= 0:
        raise NoNonEvents("no expected non-events by the horizon in the test set")
    for label, mask in (("up", up), ("down", down)):
        if mask.any() and not np.any(event[mask]):
            notes.append(f"{EmptySubsetKM.category}: {label}-classified subset "
                         "has no events; expected events set to 0")
    for note in notes:
        log.info(note)
    e_up = _expected_events(time, event, up, horizon)
    e_down = _expected_events(time, event, down, horizon)
    return _report(e_up, e_down, up.sum() - e_up, down.sum() - e_down,
                   n_e, n_ne, notes)


def _replicate_seed(seed, b):
    return np.random.SeedSequence([int(seed), int(b)])


def _bootstrap_replicate(args):
    train, test, recipe_a, recipe_b, categories, horizon, seed, b = args
    rng = np.random.default_rng(_replicate_seed(seed, b))
    idx = rng.integers(0, train.n, size=train.n)
    sample = train.take(idx)
    try:
        pa = recipe_a(sample, test, horizon)
        pb = recipe_b(sample, test, horizon)
        return cnri(test, pa, pb, categories, horizon)
    except Exception as exc:  # noqa: BLE001 - failures are counted, not fatal
        return f"{type(exc).__name__}: {exc}"


def bootstrap_cnri(train, test, recipe_a, recipe_b, categories, horizon, B=500,
                   seed=0, n_workers=1):
    """cNRI with Wald intervals from refitting both models on resampled training data.

    A recipe is a picklable callable ``recipe(train, test, horizon)`` returning
    event probabilities for the test subjects. Replicate ``b`` draws from a
    stream depending only on ``(seed, b)``, so results do not depend on the
    number of workers.
    """
    if B < 2:
        raise TooFew("bootstrap needs B >= 2")
    point = cnri(test, recipe_a(train, test, horizon),
                 recipe_b(train, test, horizon), categories, horizon)
    jobs = [(train, test, recipe_a, recipe_b, categories, horizon, seed, b)
            for b in range(B)]
    if n_workers and n_workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_bootstrap_replicate, jobs, chunksize=4))
    else:
        results = [_bootstrap_replicate(job) for job in jobs]
    reps = [r for r in results if isinstance(r, ReclassificationReport)]
    failed = [r for r in results if not isinstance(r, ReclassificationReport)]
    for msg in failed:
        warnings.warn(f"bootstrap replicate dropped: {msg}", RuntimeWarning,
                      stacklevel=2)
    if len(reps) < 2:
        raise TooFew(f"only {len(reps)} bootstrap replicates fitted successfully")
    hw = {name: float(1.96 * np.std([getattr(r, name) for r in reps], ddof=1))
          for name in ("ri_events", "ri_nonevents", "nri")}
    return replace(point, ci_halfwidth=hw, b_effective=len(reps),
                   failed_replicates=len(failed))
