"""Command line interface: ``censnb <command> [options]``.

Every command writes a ``<out>.manifest.json`` next to its main output;
``censnb rerun <manifest>`` replays the recorded arguments. Failures print a
single ``error: <Category>: <message>`` line and exit with status 2.
"""

import argparse
import json
import os
import sys
import time as _time

import numpy as np

from . import __version__
from .cnb import CensoredNaiveBayes, fit_cnb
from .covariates import LoessConfig
from .cox import CoxPH, fit_cox
from .exceptions import CensNBError, LengthMismatch, SchemaMismatch, UsageError
from .experiments import (CnbRecipe, CoxRecipe, default_workers, reproduce_table,
                          table_rows)
from .fileio import (load_model, read_columns, read_dataset, read_table, read_truth,
                     save_model, write_dataset, write_rows, write_truth)
from .metrics import (RiskCategories, bias_mse, bootstrap_cnri, cnri, nri,
                      quartile_categories)
from .simulation import ScenarioConfig, simulate


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _impute_pairs(values):
    out = {}
    for item in values or ():
        col, sep, val = item.partition("=")
        if not sep or not col:
            raise UsageError(f"--impute expects col=value, got {item!r}")
        try:
            out[col] = float(val)
        except ValueError:
            raise UsageError(f"--impute value for {col!r} is not a number") from None
    return out


def _threads(args):
    return args.threads if getattr(args, "threads", None) else default_workers()


def _write_manifest(args, argv, outputs, inputs, started):
    config = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "config": config,
        "seed": config.get("seed"),
        "inputs": [p for p in inputs if p],
        "outputs": [p for p in outputs if p],
        "software_version": __version__,
        "duration_seconds": round(_time.perf_counter() - started, 3),
    }
    with open(f"{outputs[0]}.manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


# -- commands -----------------------------------------------------------------

def cmd_simulate(args):
    if args.scenario == "misspecified-ehr" and args.rho:
        raise UsageError("--rho does not apply to the misspecified-ehr scenario")
    n = args.n if args.n is not None else (5000 if args.scenario == "misspecified-ehr" else 1000)
    config = ScenarioConfig(args.scenario, n, args.beta0, args.rho, args.seed,
                            args.horizon)
    sim = simulate(config)
    write_dataset(args.out, sim.dataset)
    if args.truth_out:
        write_truth(args.truth_out, sim)
    return [args.out, args.truth_out], []


def cmd_fit(args):
    data = read_dataset(args.train, _impute_pairs(args.impute))
    standardize = not args.no_standardize
    if args.model == "cnb":
        cfg = LoessConfig(args.span, args.degree, args.variance_floor)
        model = fit_cnb(data, cfg, standardize, args.grid_cap)
        fit_config = {"span": cfg.span, "degree": cfg.degree,
                      "variance_floor": cfg.variance_floor,
                      "standardize": standardize, "grid_cap": args.grid_cap}
    else:
        model = fit_cox(data, args.tolerance, args.max_iter, standardize)
        fit_config = {"standardize": standardize, "tolerance": args.tolerance,
                      "max_iter": args.max_iter}
    fit_config["impute"] = _impute_pairs(args.impute)
    save_model(args.out, model, fit_config)
    return [args.out], [args.train]


def _parse_times(args):
    if args.time is not None and args.times:
        raise UsageError("give either --time or --times, not both")
    if args.time is not None:
        return np.array([args.time])
    if args.times:
        try:
            return np.array([float(v) for v in args.times.split(",")])
        except ValueError:
            raise UsageError(f"--times must be comma-separated numbers: {args.times!r}") from None
    raise UsageError("one of --time or --times is required")


def _aligned_covariates(model, data):
    want = list(model.covariate_names)
    have = list(data.covariate_names)
    missing = [c for c in want if c not in have]
    extra = [c for c in have if c not in want]
    if missing or extra:
        raise SchemaMismatch(
            f"missing covariates: {missing or 'none'}; extra covariates: {extra or 'none'}")
    return data.X[:, [have.index(c) for c in want]]


def survival_matrix(model, X, times):
    """Survival predictions ``(n, len(times))`` for either model type."""
    from .cnb import CnbModel, _predict_matrix
    if isinstance(model, CnbModel):
        return _predict_matrix(model, X, times)
    from .cox import cox_linear_predictor
    eta = cox_linear_predictor(model, X)
    return np.exp(-np.outer(np.exp(eta), model.cumulative_baseline_hazard(times)))


def cmd_predict(args):
    model, fit_config = load_model(args.model)
    times = _parse_times(args)
    impute = _impute_pairs(args.impute) or fit_config.get("impute", {})
    data = read_dataset(args.data, impute)
    surv = survival_matrix(model, _aligned_covariates(model, data), times)
    rows = ((i, t, s, 1.0 - s) for i in range(data.n)
            for t, s in zip(times, surv[i]))
    write_rows(args.out, ["subject", "time", "survival", "event_prob"], rows)
    return [args.out], [args.model, args.data]


def _read_preds(path, horizon):
    cols = read_columns(path, ("subject", "time", "survival"))
    times = np.unique(cols["time"])
    if horizon is None:
        if times.size != 1:
            raise UsageError(f"{path} holds several times; pass --horizon")
        horizon = float(times[0])
    keep = cols["time"] == horizon
    if not keep.any():
        raise UsageError(f"{path} has no predictions at time {horizon}")
    order = np.argsort(cols["subject"][keep], kind="stable")
    return cols["survival"][keep][order], horizon


def _categories(spec, default):
    spec = spec or default
    if spec == "quartile":
        return None
    try:
        cuts = [float(v) for v in spec.split(",")]
    except ValueError:
        raise UsageError(f"--categories must be 'quartile' or cutpoints: {spec!r}") from None
    return RiskCategories.clinical(cuts)


def _recipe_from(path):
    model, cfg = load_model(path)
    if model.__class__.__name__ == "CnbModel":
        return CnbRecipe(cfg.get("span", 0.75), cfg.get("degree", 1),
                         cfg.get("standardize", True), cfg.get("grid_cap", 1000))
    return CoxRecipe(None, cfg.get("standardize", True))


def cmd_evaluate(args):
    surv_a, horizon = _read_preds(args.preds_a, args.horizon)
    surv_b, _ = _read_preds(args.preds_b, horizon)
    if surv_a.size != surv_b.size:
        raise LengthMismatch(f"{surv_a.size} rows in --preds-a vs {surv_b.size} in --preds-b")
    rows = []
    if args.metric in ("bias", "mse"):
        if not args.truth:
            raise UsageError(f"--metric {args.metric} requires --truth")
        truth = read_truth(args.truth)["true_surv_at_horizon"]
        ra, rb = bias_mse(surv_a, truth), bias_mse(surv_b, truth)
        key = "bias" if args.metric == "bias" else "mse_x100"
        va, vb = getattr(ra, key), getattr(rb, key)
        rows = [(f"{key}_a", va, None, None), (f"{key}_b", vb, None, None),
                (f"{key}_diff", va - vb, None, None)]
    elif args.metric == "nri":
        if not args.truth:
            raise UsageError("--metric nri requires --truth (true failure times)")
        if args.bootstrap:
            raise UsageError("--bootstrap applies to --metric cnri only")
        truth = read_truth(args.truth)
        if truth["true_time"].size != surv_a.size:
            raise LengthMismatch("truth file and predictions differ in length")
        cats = _categories(args.categories, "quartile") or quartile_categories(
            1.0 - truth["true_surv_at_horizon"])
        rep = nri(truth["true_time"] < horizon, cats.categorize(1.0 - surv_a),
                  cats.categorize(1.0 - surv_b))
        rows = rep.rows()
    elif args.metric == "cnri":
        if not args.test:
            raise UsageError("--metric cnri requires --test (censored test data)")
        test = read_dataset(args.test)
        cats = _categories(args.categories, "0.05,0.10")
        if cats is None:
            raise UsageError("quartile categories need true probabilities; "
                             "use cutpoints with --metric cnri")
        if args.bootstrap:
            if not (args.train and args.model_a and args.model_b):
                raise UsageError("--bootstrap needs --train, --model-a and --model-b")
            train = read_dataset(args.train)
            rep = bootstrap_cnri(train, test, _recipe_from(args.model_a),
                                 _recipe_from(args.model_b), cats, horizon,
                                 args.bootstrap, args.seed, _threads(args))
            # point estimate from the supplied predictions, not a refit
            point = cnri(test, 1.0 - surv_a, 1.0 - surv_b, cats, horizon)
            from dataclasses import replace
            rep = replace(point, ci_halfwidth=rep.ci_halfwidth,
                          b_effective=rep.b_effective,
                          failed_replicates=rep.failed_replicates)
        else:
            rep = cnri(test, 1.0 - surv_a, 1.0 - surv_b, cats, horizon)
        rows = rep.rows()
    write_rows(args.out, ["metric", "value", "ci_low", "ci_high"], rows)
    return [args.out], [args.preds_a, args.preds_b, args.truth, args.test,
                        args.train, args.model_a, args.model_b]


def cmd_reproduce(args):
    rows = table_rows(args.table)
    if args.n is not None:
        rows = [r for r in rows if r.n == args.n]
    if args.beta0 is not None:
        rows = [r for r in rows if r.beta0 == args.beta0]
    if args.rho is not None:
        rows = [r for r in rows if r.rho == args.rho]
    if not rows:
        raise UsageError("row filters selected no table rows")
    summary = reproduce_table(args.table, args.reps, args.seed, rows,
                              workers=_threads(args))
    header = list(summary[0].keys())
    write_rows(args.out, header, ([e[h] if not isinstance(e[h], str) else e[h]
                                   for h in header] for e in summary))
    return [args.out], []


def cmd_plotdata(args):
    data = read_dataset(args.data)
    if args.by not in data.covariate_names:
        raise SchemaMismatch(f"--by column {args.by!r} is not a covariate")
    by = data.X[:, data.covariate_names.index(args.by)]
    truth = read_truth(args.truth)["true_surv_at_horizon"] if args.truth else None
    if truth is not None and truth.size != data.n:
        raise LengthMismatch("truth file and data differ in length")
    models = []
    for tag, path in (("a", args.model_a), ("b", args.model_b)):
        if path:
            model, _ = load_model(path)
            models.append((tag, model))
    kinds = [type(m).__name__ for _, m in models]
    out = []
    for tag, model in models:
        label = ("cnb" if type(model).__name__ == "CnbModel" else "cox")
        if kinds.count(type(model).__name__) > 1:
            label = f"{label}_{tag}"
        pred = survival_matrix(model, _aligned_covariates(model, data),
                               np.array([args.horizon]))[:, 0]
        for i in range(data.n):
            out.append((i, by[i], label, pred[i],
                        None if truth is None else truth[i]))
    write_rows(args.out, ["subject", args.by, "model", "predicted", "true"], out)
    return [args.out], [args.model_a, args.model_b, args.data, args.truth]


def cmd_rerun(args):
    with open(args.manifest, encoding="utf-8") as fh:
        manifest = json.load(fh)
    argv = manifest.get("argv")
    if not isinstance(argv, list) or not argv or argv[0] == "rerun":
        raise UsageError(f"{args.manifest} does not record a rerunnable command")
    return main(argv)


# -- parser -------------------------------------------------------------------

def build_parser():
    parser = _Parser(prog="censnb", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a censored cohort")
    p.add_argument("scenario", choices=["weibull-ph", "loglogistic-aft", "misspecified-ehr"])
    p.add_argument("--n", type=int)
    p.add_argument("--beta0", type=float, default=0.0)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=float, default=7.0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth-out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a model to a training CSV")
    p.add_argument("--model", choices=["cnb", "cox"], required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--span", type=float, default=0.75)
    p.add_argument("--degree", type=int, default=1, choices=[1, 2])
    p.add_argument("--variance-floor", type=float, default=1e-6)
    p.add_argument("--grid-cap", type=int, default=1000)
    p.add_argument("--tolerance", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--impute", action="append", metavar="COL=VALUE")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict survival probabilities")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--time", type=float)
    p.add_argument("--times")
    p.add_argument("--impute", action="append", metavar="COL=VALUE")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="compare two sets of predictions")
    p.add_argument("--preds-a", required=True)
    p.add_argument("--preds-b", required=True)
    p.add_argument("--truth")
    p.add_argument("--test")
    p.add_argument("--metric", choices=["bias", "mse", "nri", "cnri"], required=True)
    p.add_argument("--horizon", type=float)
    p.add_argument("--categories")
    p.add_argument("--bootstrap", type=int, default=0, metavar="B")
    p.add_argument("--train")
    p.add_argument("--model-a")
    p.add_argument("--model-b")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("reproduce", help="rerun a simulation table")
    p.add_argument("--table", type=int, choices=[1, 2, 3], required=True)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, help="keep only rows with this sample size")
    p.add_argument("--beta0", type=float, help="keep only rows with this beta0")
    p.add_argument("--rho", type=float, help="keep only rows with this rho")
    p.add_argument("--threads", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("plotdata", help="tidy predicted-vs-true rows for plotting")
    p.add_argument("--model-a", required=True)
    p.add_argument("--model-b")
    p.add_argument("--data", required=True)
    p.add_argument("--truth")
    p.add_argument("--by", required=True)
    p.add_argument("--horizon", type=float, default=7.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plotdata)

    p = sub.add_parser("rerun", help="replay the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    started = _time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required (try --help)")
        if args.command == "rerun":
            return args.func(args)
        outputs, inputs = args.func(args)
        _write_manifest(args, argv, outputs, inputs, started)
    except CensNBError as exc:
        print(f"error: {exc.category}: {exc}".replace("\n", " "), file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        category = "IOError" if isinstance(exc, OSError) else "ValueError"
        print(f"error: {category}: {exc}".replace("\n", " "), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
