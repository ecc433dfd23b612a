"""CSV datasets, JSON model documents and run manifests.

Dataset CSV: header row, required ``time`` and ``event`` (0/1) columns, every
other column a covariate in header order. Floats are written with ``repr`` so
a write/read cycle is exact.
"""

import csv
import json
import math

import numpy as np

from .cnb import CnbModel
from .covariates import LoessConfig, SmoothedMomentCurves
from .cox import CoxModel
from .exceptions import FormatError, MissingColumn, UnparseableCell
from .preprocessing import StandardizationParams
from .survival import KaplanMeierCurve, SurvivalDataset

FORMAT_NAME = "censnb-model"
FORMAT_VERSION = 1


def fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def read_table(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    return header, rows


def _parse(cell, line, column):
    try:
        value = float(cell)
    except ValueError:
        raise UnparseableCell(
            f"row {line}, column '{column}': cannot parse {cell!r}") from None
    if not math.isfinite(value):
        raise UnparseableCell(f"row {line}, column '{column}': non-finite value")
    return value


def read_dataset(path, impute=None):
    """Load a dataset CSV, filling empty covariate cells from ``impute``."""
    impute = dict(impute or {})
    header, rows = read_table(path)
    for required in ("time", "event"):
        if required not in header:
            raise MissingColumn(f"{path}: missing required column '{required}'")
    unknown = set(impute) - set(header)
    if unknown:
        raise MissingColumn(
            f"{path}: --impute names unknown column(s) {', '.join(sorted(unknown))}")
    ti, ei = header.index("time"), header.index("event")
    cov_idx = [i for i, h in enumerate(header) if i not in (ti, ei)]
    names = tuple(header[i] for i in cov_idx)
    time, event, X = [], [], []
    for line, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise UnparseableCell(
                f"row {line}: expected {len(header)} cells, got {len(row)}")
        for i, col in ((ti, "time"), (ei, "event")):
            if row[i].strip() == "":
                raise UnparseableCell(f"row {line}, column '{col}': missing value")
        time.append(_parse(row[ti], line, "time"))
        ev = _parse(row[ei], line, "event")
        if ev not in (0.0, 1.0):
            raise UnparseableCell(f"row {line}, column 'event': must be 0 or 1")
        event.append(ev == 1.0)
        values = []
        for i in cov_idx:
            cell = row[i].strip()
            if cell == "" and header[i] in impute:
                values.append(float(impute[header[i]]))
            elif cell == "":
                raise UnparseableCell(
                    f"row {line}, column '{header[i]}': missing value "
                    "(use --impute to fill it)")
            else:
                values.append(_parse(cell, line, header[i]))
        X.append(values)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return SurvivalDataset(np.array(time), np.array(event, dtype=bool),
                           np.array(X, dtype=float).reshape(len(rows), len(names)),
                           names)


def write_dataset(path, dataset):
    header = ["time", "event", *dataset.covariate_names]
    rows = ([t, bool(d), *x] for t, d, x in
            zip(dataset.time, dataset.event, dataset.X))
    write_rows(path, header, rows)


def write_truth(path, sim):
    write_rows(path, ["true_time", "true_surv_at_horizon"],
               zip(sim.true_time, sim.true_surv))


def read_columns(path, required):
    """Named float columns from a CSV, raising MissingColumn as needed."""
    header, rows = read_table(path)
    out = {}
    for name in required:
        if name not in header:
            raise MissingColumn(f"{path}: missing required column '{name}'")
        i = header.index(name)
        out[name] = np.array([_parse(r[i], line, name)
                              for line, r in enumerate(rows, start=2)])
    return out


def read_truth(path):
    return read_columns(path, ("true_time", "true_surv_at_horizon"))


# -- model documents ---------------------------------------------------------

def _arr(values):
    return [float(v) for v in np.asarray(values, dtype=float).ravel()]


def _std_doc(std):
    return None if std is None else std.to_dict()


def serialize_model(model, fit_config=None):
    """Versioned, type-tagged JSON-ready dict for a fitted model."""
    doc = {"format": FORMAT_NAME, "version": FORMAT_VERSION}
    if isinstance(model, CnbModel):
        cfg = model.loess_config
        doc.update({
            "type": "cnb",
            "covariate_names": list(model.covariate_names),
            "loess": {"span": cfg.span, "degree": cfg.degree,
                      "variance_floor": cfg.variance_floor},
            "standardization": _std_doc(model.standardization),
            "km": {"event_times": _arr(model.km.event_times),
                   "survival_values": _arr(model.km.survival_values),
                   "at_risk_counts": [int(v) for v in model.km.at_risk_counts],
                   "event_counts": [int(v) for v in model.km.event_counts]},
            "grid": _arr(model.grid),
            "curves": [{"mu": _arr(c.mu), "sigma2": _arr(c.sigma2),
                        "theta": _arr(c.theta), "psi2": _arr(c.psi2)}
                       for c in model.curves],
        })
    elif isinstance(model, CoxModel):
        doc.update({
            "type": "cox",
            "covariate_names": list(model.covariate_names),
            "beta": _arr(model.beta),
            "baseline_times": _arr(model.baseline_times),
            "baseline_cumhaz": _arr(model.baseline_cumhaz),
            "standardization": _std_doc(model.standardization),
            "iterations": int(model.iterations),
            "grad_norm": float(model.grad_norm),
            "loglik": float(model.loglik),
        })
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    doc["fit_config"] = dict(fit_config or {})
    return doc


def dumps_model(model, fit_config=None):
    return json.dumps(serialize_model(model, fit_config), indent=1) + "\n"


def _field(doc, name, kind=None):
    if not isinstance(doc, dict) or name not in doc:
        raise FormatError(f"model document is missing field '{name}'")
    value = doc[name]
    if kind is not None and not isinstance(value, kind):
        raise FormatError(f"model document field '{name}' has the wrong type")
    return value


def _floats(doc, name, length=None):
    value = _field(doc, name, list)
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise FormatError(f"model document field '{name}' must hold numbers") from None
    if arr.ndim != 1 or (length is not None and arr.size != length):
        raise FormatError(f"model document field '{name}' has the wrong length")
    return arr


def _std_from(doc):
    value = _field(doc, "standardization")
    if value is None:
        return None
    return StandardizationParams(_floats(value, "mean"), _floats(value, "scale"))


def deserialize_model(doc):
    """Rebuild a model from :func:`serialize_model` output."""
    if not isinstance(doc, dict):
        raise FormatError("model document must be a JSON object")
    if _field(doc, "format") != FORMAT_NAME:
        raise FormatError(f"field 'format' must be {FORMAT_NAME!r}")
    version = _field(doc, "version")
    if not isinstance(version, int) or version > FORMAT_VERSION or version < 1:
        raise FormatError(
            f"unsupported model document version {version!r} "
            f"(this build reads up to {FORMAT_VERSION})")
    kind = _field(doc, "type")
    names = tuple(_field(doc, "covariate_names", list))
    if kind == "cnb":
        loess = _field(doc, "loess", dict)
        try:
            cfg = LoessConfig(float(_field(loess, "span")), int(_field(loess, "degree")),
                              float(_field(loess, "variance_floor")))
        except (TypeError, ValueError) as exc:
            raise FormatError(f"field 'loess' is invalid: {exc}") from None
        km_doc = _field(doc, "km", dict)
        ev = _floats(km_doc, "event_times")
        km = KaplanMeierCurve(ev, _floats(km_doc, "survival_values", ev.size),
                              _floats(km_doc, "at_risk_counts", ev.size).astype(int),
                              _floats(km_doc, "event_counts", ev.size).astype(int))
        grid = _floats(doc, "grid")
        curves = []
        for j, c in enumerate(_field(doc, "curves", list)):
            if not isinstance(c, dict):
                raise FormatError(f"field 'curves[{j}]' must be an object")
            curves.append(SmoothedMomentCurves(
                j, grid, *(_floats(c, k, grid.size)
                           for k in ("mu", "sigma2", "theta", "psi2")),
                cfg.variance_floor))
        if len(curves) != len(names):
            raise FormatError("field 'curves' does not match 'covariate_names'")
        return CnbModel(km, tuple(curves), grid, cfg, _std_from(doc), names)
    if kind == "cox":
        beta = _floats(doc, "beta", len(names))
        times = _floats(doc, "baseline_times")
        return CoxModel(beta, times, _floats(doc, "baseline_cumhaz", times.size),
                        _std_from(doc), int(_field(doc, "iterations")),
                        float(_field(doc, "grad_norm")), float(_field(doc, "loglik")),
                        None, names)
    raise FormatError(f"field 'type' must be 'cnb' or 'cox', got {kind!r}")


def loads_model(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"model document is not valid JSON: {exc}") from None
    return deserialize_model(doc), doc.get("fit_config", {})


def save_model(path, model, fit_config=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_model(model, fit_config))


def load_model(path):
    """Return ``(model, fit_config)`` from a model document on disk."""
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
