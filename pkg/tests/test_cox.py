import numpy as np
import pytest
from sklearn.base import clone

from censnb import CoxPH, breslow_baseline, cox_predict_survival, fit_cox, make_survival_target
from censnb.cox import partial_loglik
from censnb.exceptions import DimensionMismatch, NoEvents, NotConverged, SingularInformation
from censnb.simulation import ScenarioConfig, simulate
from censnb.survival import SurvivalDataset, kaplan_meier, km_eval
from oracles import grid_search_cox, small_binary_cox_data


@pytest.mark.parametrize("seed", range(5))
def test_matches_grid_search(seed):
    time, event, z = small_binary_cox_data(seed)
    model = fit_cox(SurvivalDataset(time, event, z.reshape(-1, 1)), standardize=False)
    best = grid_search_cox(time, event, z)
    assert abs(best) < 4.9
    assert model.beta[0] == pytest.approx(best, abs=2e-4)


def test_standardized_fit_reports_raw_scale_coef():
    time, event, z = small_binary_cox_data(3)
    raw = fit_cox(SurvivalDataset(time, event, z.reshape(-1, 1)), standardize=False)
    std = fit_cox(SurvivalDataset(time, event, z.reshape(-1, 1)))
    assert std.coef[0] == pytest.approx(raw.beta[0], abs=1e-8)


def test_null_effect():
    rng = np.random.default_rng(4)
    n = 4000
    x = rng.normal(size=n)
    T = rng.exponential(1.0, n)
    C = rng.exponential(1.5, n)
    model = fit_cox(SurvivalDataset(np.minimum(T, C), T <= C, x.reshape(-1, 1)))
    se = 1.0 / np.sqrt(model.information[0, 0])
    assert abs(model.beta[0]) < 3 * se


def test_duplicated_column_is_singular():
    time, event, z = small_binary_cox_data(1)
    with pytest.raises(SingularInformation):
        fit_cox(SurvivalDataset(time, event, np.column_stack([z, z])))


def test_no_events():
    with pytest.raises(NoEvents):
        fit_cox(SurvivalDataset([1.0, 2.0], [0, 0], np.array([[0.0], [1.0]])))


def test_not_converged_is_reported():
    time, event, z = small_binary_cox_data(2)
    with pytest.raises(NotConverged):
        fit_cox(SurvivalDataset(time, event, z.reshape(-1, 1)), tolerance=0.0, max_iter=2)


def test_breslow_hand_example():
    times, cumhaz = breslow_baseline([1, 2, 3, 4], [1, 0, 0, 0], np.zeros((4, 1)), [0.0])
    assert times.tolist() == [1.0] and cumhaz.tolist() == [0.25]


def test_breslow_at_null_is_nelson_aalen(rng):
    time = np.round(rng.exponential(2, 50), 1) + 0.1
    event = rng.random(50) < 0.7
    times, cumhaz = breslow_baseline(time, event, rng.normal(size=(50, 2)), [0.0, 0.0])
    na = np.cumsum([np.sum((time == t) & event) / np.sum(time >= t) for t in times])
    np.testing.assert_allclose(cumhaz, na, rtol=1e-14)


def test_baseline_before_first_event_and_monotone(rng):
    time = rng.exponential(1, 100)
    event = rng.random(100) < 0.8
    model = fit_cox(SurvivalDataset(time, event, rng.normal(size=(100, 1))))
    assert model.cumulative_baseline_hazard(model.baseline_times[0] / 2) == 0.0
    assert np.all(np.diff(model.baseline_cumhaz) > 0)
    x = [0.3]
    probes = np.linspace(0, time.max(), 40)
    preds = [cox_predict_survival(model, x, t) for t in probes]
    assert preds[0] == 1.0
    assert np.all(np.diff(preds) <= 0)


def test_exp_minus_nelson_aalen_close_to_km():
    rng = np.random.default_rng(8)
    time = rng.exponential(1.0, 500)
    event = np.ones(500, bool)
    Z = rng.normal(size=(500, 1))
    times, cumhaz = breslow_baseline(time, event, Z, [0.0])
    km = kaplan_meier(time, event)
    for t in np.quantile(time, [0.1, 0.3, 0.5, 0.7, 0.9]):
        h = np.concatenate(([0.0], cumhaz))[np.searchsorted(times, t, side="right")]
        assert abs(np.exp(-h) - km_eval(km, t)) < 0.02


def test_shift_invariance(rng):
    n = 200
    X = rng.normal(size=(n, 2))
    T = rng.exponential(np.exp(-X[:, 0]))
    C = rng.exponential(2, n)
    time, event = np.minimum(T, C), T <= C
    a = fit_cox(SurvivalDataset(time, event, X))
    b = fit_cox(SurvivalDataset(time, event, X + [100.0, -7.0]))
    for x in X[:20]:
        for t in (0.2, 0.8, 1.5):
            assert cox_predict_survival(b, x + [100.0, -7.0], t) == pytest.approx(
                cox_predict_survival(a, x, t), abs=1e-8)
    raw_a = fit_cox(SurvivalDataset(time, event, X), standardize=False)
    raw_b = fit_cox(SurvivalDataset(time, event, X + [100.0, -7.0]), standardize=False)
    for x in X[:20]:
        assert cox_predict_survival(raw_b, x + [100.0, -7.0], 1.0) == pytest.approx(
            cox_predict_survival(raw_a, x, 1.0), abs=1e-8)


def test_loglik_trace_never_decreases(rng):
    n = 150
    X = rng.normal(size=(n, 3))
    T = rng.exponential(np.exp(-2.0 * X[:, 0] + X[:, 1]))
    model = fit_cox(SurvivalDataset(T, np.ones(n, bool), X))
    assert np.all(np.diff(model.loglik_trace) >= -1e-12)
    assert model.grad_norm < 1e-8
    assert model.loglik == pytest.approx(
        partial_loglik(T, np.ones(n, bool), model.standardization.transform(X), model.beta))


def test_recovers_weibull_coefficient():
    sim = simulate(ScenarioConfig("weibull-ph", n=5000, beta0=0.0, rho=0.0, seed=5))
    model = fit_cox(sim.dataset)
    se = np.sqrt(np.diag(np.linalg.inv(model.information)))[0] / model.standardization.scale[0]
    assert abs(model.coef[0] - 0.5) < 3 * se
    assert np.all(np.abs(model.coef[1:]) < 0.1)


def test_estimator_api(rng):
    n = 100
    X = rng.normal(size=(n, 2))
    T = rng.exponential(np.exp(-X[:, 0]))
    y = make_survival_target(T, np.ones(n, bool))
    est = CoxPH().fit(X, y)
    assert clone(est).get_params() == est.get_params()
    np.testing.assert_allclose(est.predict_event_probability(X[:5], 1.0),
                               1 - est.predict_survival(X[:5], [1.0])[:, 0])
    assert est.predict(X).shape == (n,)
    with pytest.raises(DimensionMismatch):
        cox_predict_survival(est.model_, [1.0], 1.0)
