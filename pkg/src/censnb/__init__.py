"""Naive Bayes risk prediction for censored time-to-event data."""

__version__ = "0.1.0"

from ._validation import make_survival_target
from .cnb import CensoredNaiveBayes, CnbModel, fit_cnb, predict_curve, predict_survival
from .covariates import (LoessConfig, MomentEstimates, SmoothedMomentCurves,
                         conditional_density, estimate_moments, fit_weighted_loess,
                         precision_weights, smooth_moments)
from .cox import CoxModel, CoxPH, breslow_baseline, cox_predict_survival, fit_cox
from .metrics import (CalibrationReport, ReclassificationReport, RiskCategories,
                      bias_mse, bootstrap_cnri, cnri, nri, quartile_categories)
from .survival import (KaplanMeierCurve, SurvivalDataset, distinct_event_times,
                       fit_kaplan_meier, km_eval)

__all__ = [
    "CensoredNaiveBayes", "CnbModel", "fit_cnb", "predict_curve", "predict_survival",
    "LoessConfig", "MomentEstimates", "SmoothedMomentCurves", "conditional_density",
    "estimate_moments", "fit_weighted_loess", "precision_weights", "smooth_moments",
    "CoxModel", "CoxPH", "breslow_baseline", "cox_predict_survival", "fit_cox",
    "CalibrationReport", "ReclassificationReport", "RiskCategories", "bias_mse",
    "bootstrap_cnri", "cnri", "nri", "quartile_categories",
    "KaplanMeierCurve", "SurvivalDataset", "distinct_event_times",
    "fit_kaplan_meier", "km_eval", "make_survival_target",
]
