import json

import numpy as np
import pytest

from censnb import fit_cnb, fit_cox, predict_survival, cox_predict_survival
from censnb.exceptions import FormatError, MissingColumn, UnparseableCell
from censnb.fileio import (dumps_model, load_model, loads_model, read_dataset, save_model,
                           write_dataset)
from censnb.simulation import ScenarioConfig, simulate


@pytest.fixture(scope="module")
def sim():
    return simulate(ScenarioConfig("weibull-ph", n=400, beta0=0.0, rho=0.3, seed=6))


def test_dataset_round_trip_is_exact(tmp_path, sim):
    path = tmp_path / "d.csv"
    write_dataset(path, sim.dataset)
    back = read_dataset(path)
    np.testing.assert_array_equal(back.time, sim.dataset.time)
    np.testing.assert_array_equal(back.event, sim.dataset.event)
    np.testing.assert_array_equal(back.X, sim.dataset.X)
    assert back.covariate_names == sim.dataset.covariate_names


def test_impute_and_cell_errors(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("time,event,ldl,age\n1.5,1,,40\n2.0,0,130,50\n")
    with pytest.raises(UnparseableCell, match="row 2, column 'ldl'"):
        read_dataset(path)
    ds = read_dataset(path, {"ldl": 120})
    assert ds.X[:, 0].tolist() == [120.0, 130.0]
    path.write_text("time,event,age\n1.5,1,forty\n")
    with pytest.raises(UnparseableCell, match="column 'age'"):
        read_dataset(path)
    path.write_text("event,age\n1,40\n")
    with pytest.raises(MissingColumn, match="'time'"):
        read_dataset(path)
    path.write_text("time,event,age\n,1,40\n")
    with pytest.raises(UnparseableCell, match="'time'"):
        read_dataset(path)


def _probes(model_p, rng, tmax):
    return [(rng.normal(size=model_p) * 2, rng.uniform(0, tmax)) for _ in range(100)]


def test_cnb_round_trip(sim):
    model = fit_cnb(sim.dataset)
    back, cfg = loads_model(dumps_model(model, {"span": 0.75}))
    assert cfg == {"span": 0.75}
    np.testing.assert_array_equal(back.grid, model.grid)
    for a, b in zip(model.curves, back.curves):
        for name in ("mu", "sigma2", "theta", "psi2"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    rng = np.random.default_rng(0)
    for x, t in _probes(model.p, rng, 12):
        assert predict_survival(back, x, t) == predict_survival(model, x, t)


def test_cox_round_trip(tmp_path, sim):
    model = fit_cox(sim.dataset)
    save_model(tmp_path / "m.json", model)
    back, _ = load_model(tmp_path / "m.json")
    rng = np.random.default_rng(1)
    for x, t in _probes(model.p, rng, 12):
        assert cox_predict_survival(back, x, t) == cox_predict_survival(model, x, t)


def test_truncated_and_future_documents(sim):
    text = dumps_model(fit_cox(sim.dataset))
    with pytest.raises(FormatError):
        loads_model(text[: len(text) // 2])
    doc = json.loads(text)
    doc["version"] = 99
    with pytest.raises(FormatError, match="99"):
        loads_model(json.dumps(doc))
    doc = json.loads(text)
    del doc["beta"]
    with pytest.raises(FormatError, match="'beta'"):
        loads_model(json.dumps(doc))
    doc = json.loads(dumps_model(fit_cnb(sim.dataset)))
    doc["curves"][0]["mu"] = doc["curves"][0]["mu"][:-1]
    with pytest.raises(FormatError, match="'mu'"):
        loads_model(json.dumps(doc))
