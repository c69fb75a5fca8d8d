"""Command-line front end.

Subcommands: fit, cv, predict, simulate, multitask, weights. Exit codes:
0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from typing import Optional

import numpy as np

from .core import fwelnet_fit, penalty_weights, scores
from .cv import cv_elnet, cv_fwelnet, default_metric, make_folds
from .data import DataError, Dataset, read_labels, read_matrix, read_vector
from .multitask import multitask_fit
from .serialize import DocumentError, ModelDocument, document_from_fit, plain, read_theta
from .simulate import SETTINGS, SimConfig, group_means, run_experiment
from .solver import NumericalError, SolverConfig, fit_elnet

log = logging.getLogger("fwelnet")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

SETTING_ALIASES = {
    "1": "setting1",
    "2a": "setting2_one_group",
    "2b": "setting2_four_groups",
    "3": "setting3",
    "fig1": "fig1",
    "mt": "multitask",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- output helpers -----------------------------------------------------------

def fmt(v) -> str:
    """Shortest round-trip text for a number."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _open_out(path: Optional[str]):
    if path is None or path == "-":
        return _Stdout()
    return open(path, "w", newline="", encoding="utf-8")


class _Stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        sys.stdout.flush()
        return False


def write_csv(path, header, rows) -> None:
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([c if isinstance(c, str) else fmt(c) for c in row])


def write_json(path, tree) -> None:
    text = json.dumps(plain(tree), indent=1, allow_nan=False) + "\n"
    with _open_out(path) as fh:
        fh.write(text)


def _with_suffix(prefix: str, suffix: str) -> str:
    return f"{prefix}{suffix}"


# -- shared loading -----------------------------------------------------------

def _load_xy(args, y_flag="y") -> tuple[np.ndarray, np.ndarray]:
    x, _ = read_matrix(args.x, args.header)
    y = read_vector(getattr(args, y_flag), args.header)
    if y.size != x.shape[0]:
        raise DataError(f"x has {x.shape[0]} rows but {y_flag} has {y.size} entries")
    return x, y


def _load_z(args, p: int) -> Optional[np.ndarray]:
    if args.z is None:
        return None
    z, _ = read_matrix(args.z, args.header)
    if z.shape[0] != p:
        raise DataError(f"z has {z.shape[0]} rows but x has {p} columns (z needs one row per feature)")
    return z


def _dataset(args, x, y, groups=None) -> Dataset:
    if args.family == "binomial":
        bad = ~np.isin(y, (0.0, 1.0))
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise DataError(f"binomial response must be 0/1; row {i + 1} has {y[i]!r}")
    return Dataset(x, y, groups, args.family)


def _fit_config(args) -> dict:
    return {
        "command": args.command,
        "family": args.family,
        "alpha": args.alpha,
        "n_iter": args.niter,
        "aggregate": args.aggregate,
        "n_lambda": args.nlambda,
        "lambda_min_ratio": args.lambda_min_ratio,
        "standardize": not args.no_standardize,
        "seed": args.seed,
        "has_z": args.z is not None,
    }


def _check_common(args) -> None:
    if not 0.0 <= args.alpha <= 1.0:
        raise UsageError("--alpha must lie in [0, 1]")
    if args.niter < 0:
        raise UsageError("--niter must be >= 0")
    if args.nlambda < 1:
        raise UsageError("--nlambda must be >= 1")
    if args.lambda_min_ratio is not None and not 0.0 < args.lambda_min_ratio < 1.0:
        raise UsageError("--lambda-min-ratio must lie in (0, 1)")


def _threads(args) -> int:
    return args.threads if args.threads else (os.cpu_count() or 1)


# -- commands -----------------------------------------------------------------

def cmd_fit(args) -> int:
    _check_common(args)
    x, y = _load_xy(args)
    z = _load_z(args, x.shape[1])
    data = _dataset(args, x, y)
    cfg = SolverConfig(alpha=args.alpha, family=args.family)
    if z is None:
        fit = fit_elnet(data, alpha=args.alpha, n_lambda=args.nlambda, min_ratio=args.lambda_min_ratio,
                        standardize_x=not args.no_standardize, config=cfg)
        doc = document_from_fit(fit, _fit_config(args))
    else:
        model = fwelnet_fit(data, z, args.alpha, args.niter, args.aggregate, cfg, args.nlambda,
                            args.lambda_min_ratio, standardize_x=not args.no_standardize)
        doc = document_from_fit(model.fit, _fit_config(args), model.theta, model.history)
    with _open_out(args.out) as fh:
        fh.write(doc.dumps())
    return EXIT_OK


def cmd_cv(args) -> int:
    _check_common(args)
    metric = args.metric or default_metric(args.family)
    if metric == "auc" and args.family != "binomial":
        raise UsageError("--metric auc requires --family binomial")
    if metric == "deviance" and args.family != "binomial":
        raise UsageError("--metric deviance requires --family binomial")
    x, y = _load_xy(args)
    z = _load_z(args, x.shape[1])
    groups = None
    if args.fold_groups is not None:
        groups = read_labels(args.fold_groups, args.header)
        if groups.size != x.shape[0]:
            raise DataError(f"--fold-groups has {groups.size} entries for {x.shape[0]} observations")
    data = _dataset(args, x, y, groups)
    try:
        folds = make_folds(data.n, args.nfolds, groups, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cfg = SolverConfig(alpha=args.alpha, family=args.family)
    common = dict(folds=folds, metric=metric, n_lambda=args.nlambda, min_ratio=args.lambda_min_ratio,
                  standardize_x=not args.no_standardize, config=cfg, n_jobs=_threads(args))
    if z is None:
        fit, cvres = cv_elnet(data, args.alpha, **common)
        theta = history = None
    else:
        model, cvres = cv_fwelnet(data, z, args.alpha, args.niter, args.aggregate, **common)
        fit, theta, history = model.fit, model.theta, model.history
    summary = cvres.summary()
    summary["fold_integrity"] = {
        "fold_groups": args.fold_groups is not None,
        "n_groups": None if groups is None else int(np.unique(groups).size),
        "groups_within_single_fold": bool(folds.respects(groups)),
    }
    summary["fold_sizes"] = [int(np.sum(folds.fold_of == k)) for k in range(folds.k)]
    write_csv(_with_suffix(args.out, ".csv"), ["lambda", "mean", "se"],
              zip(cvres.lambdas, cvres.mean_metric, cvres.se_metric))
    write_json(_with_suffix(args.out, ".json"), {"config": _fit_config(args) | {"nfolds": args.nfolds,
                                                                                 "metric": metric},
                                                 "summary": summary})
    doc = document_from_fit(fit, _fit_config(args) | {"nfolds": args.nfolds, "metric": metric},
                            theta, history, cv=cvres.summary())
    doc.write(_with_suffix(args.out, ".model.json"))
    return EXIT_OK


def cmd_predict(args) -> int:
    try:
        doc = ModelDocument.read(args.model)
    except OSError as exc:
        raise DataError(f"{args.model}: {exc.strerror}") from None
    x, _ = read_matrix(args.x, args.header)
    if x.shape[1] != doc.coefficients.shape[0]:
        raise DataError(f"x has {x.shape[1]} columns, model expects {doc.coefficients.shape[0]}")
    if args.lambda_index is None and args.lambda_value is None and doc.cv is None:
        raise UsageError("give --lambda-index or --lambda (the model has no CV summary)")
    try:
        out = doc.predict(x, args.lambda_index, args.lambda_value)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if doc.family == "binomial":
        eta, prob = out
        write_csv(args.out, ["eta", "prob"], zip(eta, prob))
    else:
        write_csv(args.out, ["eta"], ((v,) for v in out))
    return EXIT_OK


def _score_rows(results):
    for r in results:
        if r.error is not None:
            continue
        for s in r.scores:
            yield (r.run, s.method, s.test_mse, s.tpr, s.fpr)


def cmd_simulate(args) -> int:
    setting = SETTING_ALIASES[args.setting]
    kw = dict(setting=setting, n_runs=args.runs, seed=args.seed, alpha=args.alpha, n_iter=args.niter,
              aggregate=args.aggregate, nfolds=args.nfolds, n_lambda=args.nlambda)
    if args.snr_y is not None:
        kw["snr_y"] = args.snr_y
    if args.snr_z is not None:
        kw["snr_z"] = args.snr_z
    if args.n_test is not None:
        kw["n_test"] = args.n_test
    if setting == "multitask" and args.no_mt_lasso:
        kw["include_mt_lasso"] = False
    try:
        config = SimConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    results, summary = run_experiment(config, n_jobs=_threads(args))
    write_csv(_with_suffix(args.out, ".csv"), ["run", "method", "test_mse", "tpr", "fpr"],
              _score_rows(results))
    tree = {"config": vars(config).copy(), "summary": summary}
    if setting == "fig1":
        ok = [r for r in results if r.error is None and r.weights is not None]
        write_csv(_with_suffix(args.out, "_weights.csv"), ["run", "feature", "weight"],
                  ((r.run, j + 1, w) for r in ok for j, w in enumerate(r.weights)))
        means = np.array([group_means(r.weights) for r in ok])
        ordered = [bool(m[0] < m[1] < m[2:].min()) for m in means]
        tree["fig1"] = {
            "group_mean_weights": means,
            "ordered_runs": int(sum(ordered)),
            "n_runs": len(ok),
        }
    write_json(_with_suffix(args.out, ".json"), tree)
    return EXIT_OK if summary["n_failed"] == 0 else EXIT_NUMERICAL


def cmd_multitask(args) -> int:
    if args.outer < 0:
        raise UsageError("--outer must be >= 0")
    if not 0.0 <= args.alpha <= 1.0:
        raise UsageError("--alpha must lie in [0, 1]")
    x, y1 = _load_xy(args, "y1")
    y2 = read_vector(args.y2, args.header)
    if y2.size != x.shape[0]:
        raise DataError(f"x has {x.shape[0]} rows but y2 has {y2.size} entries")
    try:
        folds = make_folds(x.shape[0], args.nfolds, None, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    res = multitask_fit(x, y1, y2, n_outer=args.outer, alpha=args.alpha, n_iter=args.niter,
                        mode=args.aggregate, n_lambda=args.nlambda, folds=folds)
    tree = {
        "config": {"outer": args.outer, "alpha": args.alpha, "n_iter": args.niter,
                   "aggregate": args.aggregate, "nfolds": args.nfolds, "n_lambda": args.nlambda,
                   "seed": args.seed},
        "intercept1": res.intercept1,
        "intercept2": res.intercept2,
        "beta1": res.beta1,
        "beta2": res.beta2,
        "theta1": res.thetas1,
        "theta2": res.thetas2,
        "snapshots": [{"beta1": b1, "beta2": b2} for b1, b2 in res.snapshots],
        "cv1": res.cv1.summary(),
        "cv2": res.cv2.summary(),
    }
    write_json(args.out, tree)
    return EXIT_OK


def cmd_weights(args) -> int:
    z, _ = read_matrix(args.z, args.header)
    try:
        theta = read_theta(args.theta)
    except OSError as exc:
        raise DataError(f"{args.theta}: {exc.strerror}") from None
    if theta.size != z.shape[1]:
        raise DataError(f"theta has {theta.size} entries but z has {z.shape[1]} columns")
    with np.errstate(over="ignore"):
        w = penalty_weights(z, theta)
    if not np.all(np.isfinite(w)):
        raise NumericalError("penalty weights overflow for this theta")
    write_csv(args.out, ["feature", "score", "weight"],
              ((j + 1, s, wj) for j, (s, wj) in enumerate(zip(scores(z, theta), w))))
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _add_io(p):
    p.add_argument("--header", action="store_true", help="skip the first row of every CSV input")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads for folds/runs (default: available cores)")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_fit_flags(p):
    p.add_argument("--x", required=True, help="n x p feature matrix (CSV)")
    p.add_argument("--y", required=True, help="response vector (CSV, one value per row)")
    p.add_argument("--z", help="p x K feature-information matrix (CSV); omit for the plain elastic net")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--niter", type=int, default=1, help="theta updates (1, 2 or 5 are typical)")
    p.add_argument("--aggregate", choices=("mean", "median"), default="mean")
    p.add_argument("--family", choices=("gaussian", "binomial"), default="gaussian")
    p.add_argument("--nlambda", type=int, default=100)
    p.add_argument("--lambda-min-ratio", type=float, default=None)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    _add_io(p)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fwelnet", description="Feature-weighted elastic net.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("fit", help="fit a path and write a model document")
    _add_fit_flags(p)
    p.add_argument("--out", default="-", help="model JSON path (default: stdout)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cv", help="cross-validate; writes OUT.csv, OUT.json, OUT.model.json")
    _add_fit_flags(p)
    p.add_argument("--nfolds", type=int, default=10)
    p.add_argument("--fold-groups", help="one group id per observation; groups never span folds")
    p.add_argument("--metric", choices=("mse", "deviance", "auc"), default=None)
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("predict", help="predict from a model document")
    p.add_argument("--model", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--lambda-index", type=int, default=None)
    p.add_argument("--lambda", dest="lambda_value", type=float, default=None)
    p.add_argument("--out", default="-")
    _add_io(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="run a seeded simulation battery; writes OUT.csv and OUT.json")
    p.add_argument("--setting", required=True, choices=tuple(SETTING_ALIASES))
    p.add_argument("--snr-y", type=float, default=None)
    p.add_argument("--snr-z", type=float, default=None)
    p.add_argument("--runs", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--niter", type=int, default=1)
    p.add_argument("--aggregate", choices=("mean", "median"), default="mean")
    p.add_argument("--nfolds", type=int, default=10)
    p.add_argument("--nlambda", type=int, default=100)
    p.add_argument("--n-test", type=int, default=None)
    p.add_argument("--no-mt-lasso", action="store_true", help="skip the multi-response lasso reference")
    p.add_argument("--out", required=True, help="output prefix")
    _add_io(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("multitask", help="alternating two-response fit")
    p.add_argument("--x", required=True)
    p.add_argument("--y1", required=True)
    p.add_argument("--y2", required=True)
    p.add_argument("--outer", type=int, default=3)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--niter", type=int, default=1)
    p.add_argument("--aggregate", choices=("mean", "median"), default="mean")
    p.add_argument("--nfolds", type=int, default=10)
    p.add_argument("--nlambda", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    _add_io(p)
    p.set_defaults(func=cmd_multitask)

    p = sub.add_parser("weights", help="print feature scores and penalty weights for a theta")
    p.add_argument("--z", required=True)
    p.add_argument("--theta", required=True, help="JSON list, {\"theta\": [...]}, or a model document")
    p.add_argument("--out", default="-")
    _add_io(p)
    p.set_defaults(func=cmd_weights)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DocumentError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:  # remaining validation failures concern the inputs
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
