import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from censnb.cli import main
from censnb.fileio import load_model, read_dataset


@pytest.fixture
def work(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def run(*argv):
    assert main(list(argv)) == 0


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_simulate_is_deterministic(work):
    args = ["simulate", "weibull-ph", "--n", "100", "--beta0", "0", "--rho", "0",
            "--seed", "1"]
    run(*args, "--out", "a.csv", "--truth-out", "ta.csv")
    run(*args, "--out", "b.csv", "--truth-out", "tb.csv")
    assert (work / "a.csv").read_bytes() == (work / "b.csv").read_bytes()
    assert (work / "ta.csv").read_bytes() == (work / "tb.csv").read_bytes()
    manifest = json.loads((work / "a.csv.manifest.json").read_text())
    assert manifest["seed"] == 1 and manifest["outputs"] == ["a.csv", "ta.csv"]
    assert {"software_version", "duration_seconds", "config"} <= set(manifest)


def test_misspecified_and_loglogistic_simulation(work):
    run("simulate", "misspecified-ehr", "--n", "5000", "--out", "m.csv")
    ds = read_dataset(work / "m.csv")
    assert ds.n == 5000 and ds.X[:, 0].max() <= 100
    run("simulate", "loglogistic-aft", "--beta0", "-1", "--n", "10000", "--seed", "2",
        "--out", "l.csv", "--truth-out", "lt.csv")
    truth = rows(work / "lt.csv")
    assert abs(np.mean([float(r["true_time"]) < 7 for r in truth]) - 0.40) < 0.03


def test_fit_predict_and_type_tags(work):
    run("simulate", "weibull-ph", "--n", "300", "--seed", "3", "--out", "d.csv")
    run("fit", "--model", "cnb", "--train", "d.csv", "--out", "cnb.json")
    run("fit", "--model", "cox", "--train", "d.csv", "--out", "cox.json")
    tags = [json.loads((work / f).read_text())["type"] for f in ("cnb.json", "cox.json")]
    assert tags == ["cnb", "cox"]
    assert load_model(work / "cnb.json") and load_model(work / "cox.json")
    run("predict", "--model", "cnb.json", "--data", "d.csv", "--time", "0", "--out", "p0.csv")
    assert all(float(r["survival"]) == 1.0 for r in rows(work / "p0.csv"))
    run("predict", "--model", "cox.json", "--data", "d.csv", "--times", "1,7",
        "--out", "p1.csv")
    run("predict", "--model", "cox.json", "--data", "d.csv", "--times", "1,7",
        "--out", "p2.csv")
    assert (work / "p1.csv").read_bytes() == (work / "p2.csv").read_bytes()
    out = rows(work / "p1.csv")
    assert len(out) == 600
    assert float(out[0]["event_prob"]) == pytest.approx(1 - float(out[0]["survival"]))


def test_no_covariate_predictions_equal_km(work):
    (work / "d.csv").write_text("time,event\n1,1\n2,0\n3,1\n4,1\n")
    run("fit", "--model", "cnb", "--train", "d.csv", "--out", "m.json", "--span", "1")
    run("predict", "--model", "m.json", "--data", "d.csv", "--times", "0.5,2,3.5,5",
        "--out", "p.csv")
    surv = [float(r["survival"]) for r in rows(work / "p.csv")[:4]]
    assert surv == [1.0, 0.75, 0.375, 0.0]


def test_impute_and_error_reporting(work, capsys):
    (work / "d.csv").write_text(
        "time,event,ldl\n1,1,\n2,0,100\n3,1,140\n4,1,\n5,0,90\n6,1,130\n")
    assert main(["fit", "--model", "cox", "--train", "d.csv", "--out", "m.json"]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error: UnparseableCell:") and "ldl" in err
    run("fit", "--model", "cox", "--train", "d.csv", "--out", "m.json", "--impute", "ldl=120")
    model, cfg = load_model(work / "m.json")
    assert cfg["impute"] == {"ldl": 120.0}
    assert model.standardization.mean[0] == pytest.approx((120 * 2 + 100 + 140 + 90 + 130) / 6)
    (work / "bad.csv").write_text("event,ldl\n1,3\n")
    assert main(["fit", "--model", "cox", "--train", "bad.csv", "--out", "x.json"]) == 2
    err = capsys.readouterr().err
    assert err.strip().count("\n") == 0 and "MissingColumn" in err and "'time'" in err


def test_schema_mismatch(work, capsys):
    run("simulate", "weibull-ph", "--n", "100", "--out", "d.csv")
    run("fit", "--model", "cox", "--train", "d.csv", "--out", "m.json")
    (work / "e.csv").write_text("time,event,x1,x2,x9\n1,1,0,0,0\n")
    assert main(["predict", "--model", "m.json", "--data", "e.csv", "--time", "1",
                 "--out", "p.csv"]) == 2
    err = capsys.readouterr().err
    assert "SchemaMismatch" in err and "x3" in err and "x9" in err


def test_evaluate_identities(work):
    run("simulate", "weibull-ph", "--n", "400", "--seed", "5", "--out", "tr.csv")
    run("simulate", "weibull-ph", "--n", "400", "--seed", "6", "--out", "va.csv",
        "--truth-out", "truth.csv")
    run("fit", "--model", "cnb", "--train", "tr.csv", "--out", "a.json")
    run("fit", "--model", "cox", "--train", "tr.csv", "--out", "b.json")
    for tag in "ab":
        run("predict", "--model", f"{tag}.json", "--data", "va.csv", "--time", "7",
            "--out", f"{tag}.csv")
    for metric in ("bias", "mse", "nri"):
        run("evaluate", "--preds-a", "a.csv", "--preds-b", "a.csv", "--truth", "truth.csv",
            "--metric", metric, "--out", f"same_{metric}.csv")
        values = [float(r["value"]) for r in rows(work / f"same_{metric}.csv")]
        assert values[-1] == 0.0
    run("evaluate", "--preds-a", "a.csv", "--preds-b", "b.csv", "--test", "va.csv",
        "--metric", "cnri", "--categories", "0.05,0.10", "--out", "c.csv")
    assert [r["metric"] for r in rows(work / "c.csv")] == ["ri_events", "ri_nonevents", "nri"]


def test_cnri_on_uncensored_file_equals_nri(work):
    rng = np.random.default_rng(0)
    n = 300
    T = rng.exponential(8, n)
    x = rng.normal(size=n)
    with open(work / "test.csv", "w") as fh:
        fh.write("time,event,x\n" + "".join(f"{t!r},1,{v!r}\n" for t, v in zip(T.tolist(), x.tolist())))
    with open(work / "truth.csv", "w") as fh:
        fh.write("true_time,true_surv_at_horizon\n"
                 + "".join(f"{t!r},{float(np.exp(-7 / 8))!r}\n" for t in T.tolist()))
    for tag in "ab":
        p = rng.random(n)
        with open(work / f"{tag}.csv", "w") as fh:
            fh.write("subject,time,survival,event_prob\n"
                     + "".join(f"{i},7.0,{s!r},{1 - s!r}\n" for i, s in enumerate(p.tolist())))
    common = ["--preds-a", "a.csv", "--preds-b", "b.csv", "--categories", "0.3,0.6"]
    run("evaluate", *common, "--truth", "truth.csv", "--metric", "nri", "--out", "n.csv")
    run("evaluate", *common, "--test", "test.csv", "--metric", "cnri", "--out", "c.csv")
    for a, b in zip(rows(work / "n.csv"), rows(work / "c.csv")):
        assert float(a["value"]) == pytest.approx(float(b["value"]), abs=1e-12)


def test_evaluate_mode_errors(work, capsys):
    (work / "a.csv").write_text("subject,time,survival,event_prob\n0,7.0,0.9,0.1\n")
    assert main(["evaluate", "--preds-a", "a.csv", "--preds-b", "a.csv", "--metric", "cnri",
                 "--out", "o.csv"]) == 2
    assert "requires --test" in capsys.readouterr().err
    (work / "b.csv").write_text(
        "subject,time,survival,event_prob\n0,7.0,0.9,0.1\n1,7.0,0.8,0.2\n")
    assert main(["evaluate", "--preds-a", "a.csv", "--preds-b", "b.csv", "--metric", "nri",
                 "--truth", "a.csv", "--out", "o.csv"]) == 2
    assert "LengthMismatch" in capsys.readouterr().err


def test_plotdata_rows(work):
    run("simulate", "misspecified-ehr", "--n", "300", "--seed", "1", "--out", "d.csv",
        "--truth-out", "t.csv")
    run("fit", "--model", "cnb", "--train", "d.csv", "--out", "a.json")
    run("fit", "--model", "cox", "--train", "d.csv", "--out", "b.json")
    run("plotdata", "--model-a", "a.json", "--model-b", "b.json", "--data", "d.csv",
        "--truth", "t.csv", "--by", "age", "--out", "plot.csv")
    out = rows(work / "plot.csv")
    assert len(out) == 600
    assert {r["model"] for r in out} == {"cnb", "cox"}
    assert set(out[0]) == {"subject", "age", "model", "predicted", "true"}


def test_rerun_reproduces_outputs(work):
    run("simulate", "loglogistic-aft", "--n", "200", "--seed", "9", "--out", "d.csv")
    run("fit", "--model", "cnb", "--train", "d.csv", "--out", "m.json")
    run("predict", "--model", "m.json", "--data", "d.csv", "--times", "2,7",
        "--out", "p.csv")
    before = {f: (work / f).read_bytes() for f in ("d.csv", "m.json", "p.csv")}
    for f in before:
        (work / f).unlink()
    for f in ("d.csv", "m.json", "p.csv"):
        run("rerun", f"{f}.manifest.json")
        assert (work / f).read_bytes() == before[f]


def test_reproduce_is_deterministic(work):
    common = ["reproduce", "--table", "1", "--reps", "2", "--seed", "7", "--n", "1000",
              "--beta0", "0", "--rho", "0"]
    run(*common, "--out", "r1.csv")
    run(*common, "--out", "r2.csv", "--threads", "2")
    assert (work / "r1.csv").read_bytes() == (work / "r2.csv").read_bytes()
    assert len(rows(work / "r1.csv")) == 1


def test_console_script_exit_status(work):
    proc = subprocess.run([sys.executable, "-m", "censnb.cli", "fit", "--model", "cnb",
                           "--train", "missing.csv", "--out", "m.json"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert proc.stderr.startswith("error: ")
    proc = subprocess.run([sys.executable, "-m", "censnb.cli", "fit"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "UsageError" in proc.stderr
