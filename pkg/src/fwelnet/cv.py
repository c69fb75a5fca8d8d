"""Grouped k-fold cross-validation over a fixed lambda sequence."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.stats import rankdata

from .core import fwelnet_fit
from .data import Dataset, as_index_array
from .solver import SolverConfig, fit_elnet

METRICS = ("mse", "deviance", "auc")


@dataclass(frozen=True)
class FoldAssignment:
    fold_of: np.ndarray
    k: int

    def rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def respects(self, groups) -> bool:
        """True when every group id maps to exactly one fold."""
        if groups is None:
            return True
        codes = as_index_array(groups)
        for g in np.unique(codes):
            if np.unique(self.fold_of[codes == g]).size != 1:
                return False
        return True


def make_folds(n: int, k: int, obs_group_ids=None, seed: int = 0) -> FoldAssignment:
    """Shuffle observations (or whole groups) and deal them round-robin into k folds."""
    if obs_group_ids is None:
        codes = np.arange(n)
    else:
        if len(obs_group_ids) != n:
            raise ValueError(f"got {len(obs_group_ids)} group ids for {n} observations")
        codes = as_index_array(obs_group_ids)
    n_units = int(codes.max()) + 1
    if k < 2:
        raise ValueError("need at least 2 folds")
    if k > n_units:
        what = "distinct groups" if obs_group_ids is not None else "observations"
        raise ValueError(f"{k} folds requested but only {n_units} {what}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_units)
    unit_fold = np.empty(n_units, dtype=int)
    unit_fold[order] = np.arange(n_units) % k
    return FoldAssignment(unit_fold[codes], k)


def auc(scores, labels) -> float:
    """Area under the ROC curve (Mann-Whitney statistic, ties count 1/2)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes among the labels")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def _fold_metric(metric: str, family: str, y: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Metric for every column of the held-out linear-predictor matrix."""
    if metric == "mse" or (metric == "deviance" and family == "gaussian"):
        if family == "binomial":
            prob = 1.0 / (1.0 + np.exp(-eta))
            return np.mean((y[:, None] - prob) ** 2, axis=0)
        return np.mean((y[:, None] - eta) ** 2, axis=0)
    if metric == "deviance":
        return 2.0 * np.mean(np.logaddexp(0.0, eta) - y[:, None] * eta, axis=0)
    if metric == "auc":
        if np.unique(y).size < 2:
            return np.full(eta.shape[1], np.nan)
        return np.array([auc(eta[:, j], y) for j in range(eta.shape[1])])
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


@dataclass(frozen=True)
class CvResult:
    lambdas: np.ndarray
    mean_metric: np.ndarray
    se_metric: np.ndarray
    fold_metrics: np.ndarray      # k x m, NaN rows for excluded folds
    metric: str
    index_min: int
    index_1se: int
    folds: Optional[FoldAssignment] = None

    @property
    def lambda_min(self) -> float:
        return float(self.lambdas[self.index_min])

    @property
    def lambda_1se(self) -> float:
        return float(self.lambdas[self.index_1se])

    @property
    def maximize(self) -> bool:
        return self.metric == "auc"

    def summary(self) -> dict:
        return {
            "metric": self.metric,
            "lambda_min": self.lambda_min,
            "lambda_1se": self.lambda_1se,
            "index_min": self.index_min,
            "index_1se": self.index_1se,
            "metric_min": float(self.mean_metric[self.index_min]),
            "metric_1se": float(self.mean_metric[self.index_1se]),
            "se_min": float(self.se_metric[self.index_min]),
            "n_folds": int(self.fold_metrics.shape[0]),
        }


def summarize_folds(lambdas, fold_metrics: np.ndarray, metric: str, folds=None) -> CvResult:
    """Mean, standard error and the lambda_min / lambda_1se choices."""
    lambdas = np.asarray(lambdas, dtype=float)
    used = ~np.all(np.isnan(fold_metrics), axis=1)
    if not np.any(used):
        raise ValueError("no fold produced a usable metric")
    vals = fold_metrics[used]
    k = vals.shape[0]
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(k) if k > 1 else np.zeros_like(mean)
    maximize = metric == "auc"
    # first index = largest lambda among ties
    best = int(np.argmax(mean)) if maximize else int(np.argmin(mean))
    if maximize:
        ok = mean >= mean[best] - se[best]
    else:
        ok = mean <= mean[best] + se[best]
    one_se = int(np.flatnonzero(ok[: best + 1])[0])
    return CvResult(lambdas, mean, se, fold_metrics, metric, best, one_se, folds)


def cross_validate(
    data: Dataset,
    fit_fn: Callable[[Dataset], object],
    metric: str,
    folds: FoldAssignment,
    lambdas: Optional[np.ndarray] = None,
    n_jobs: int = 1,
) -> CvResult:
    """Refit on each fold's complement and score the held-out rows at every lambda.

    ``fit_fn`` receives the training subset and must return an object with
    ``linear_predictor(x)`` giving an (n_test x m) matrix on a common
    lambda sequence. Folds whose AUC is undefined (one class only) are
    dropped from the mean with a warning.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    if metric == "auc" and data.family != "binomial":
        raise ValueError("auc requires the binomial family")

    def run(fold):
        test = folds.rows(fold)
        train = np.flatnonzero(folds.fold_of != fold)
        model = fit_fn(data.subset(train))
        eta = model.linear_predictor(data.x[test])
        return _fold_metric(metric, data.family, data.y[test], eta), model

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            out = list(pool.map(run, range(folds.k)))
    else:
        out = [run(f) for f in range(folds.k)]
    fold_metrics = np.vstack([o[0] for o in out])
    bad = np.all(np.isnan(fold_metrics), axis=1)
    if np.any(bad):
        warnings.warn(
            f"{int(bad.sum())} fold(s) had a single class; AUC undefined there, fold(s) excluded",
            stacklevel=2,
        )
    if lambdas is None:
        lambdas = getattr(out[0][1], "lambdas")
    return summarize_folds(lambdas, fold_metrics, metric, folds)


def default_metric(family: str) -> str:
    return "mse" if family == "gaussian" else "deviance"


def cv_elnet(data: Dataset, alpha: float = 1.0, nfolds: int = 10, seed: int = 0,
             metric: Optional[str] = None, folds: Optional[FoldAssignment] = None,
             weights=None, n_lambda: int = 100, min_ratio=None, standardize_x: bool = True,
             config: Optional[SolverConfig] = None, n_jobs: int = 1):
    """Elastic-net fit on all rows plus CV over its lambda sequence.

    Returns (full-data ElnetFit, CvResult).
    """
    metric = metric or default_metric(data.family)
    full = fit_elnet(data, weights, alpha, n_lambda, min_ratio, standardize_x=standardize_x,
                     config=config)
    seq = full.lambda_seq
    folds = folds or make_folds(data.n, nfolds, data.obs_group_ids, seed)

    def fit_fn(train):
        return fit_elnet(train, weights, alpha, lambda_seq=seq, standardize_x=standardize_x,
                         config=config)

    return full, cross_validate(data, fit_fn, metric, folds, seq.values, n_jobs)


def cv_fwelnet(data: Dataset, z, alpha: float = 1.0, n_iter: int = 1, mode: str = "mean",
               nfolds: int = 10, seed: int = 0, metric: Optional[str] = None,
               folds: Optional[FoldAssignment] = None, n_lambda: int = 100, min_ratio=None,
               standardize_x: bool = True, config: Optional[SolverConfig] = None, n_jobs: int = 1):
    """fwelnet on all rows plus CV; theta is re-learned inside every training fold.

    Returns (full-data FwelnetModel, CvResult).
    """
    metric = metric or default_metric(data.family)
    full = fwelnet_fit(data, z, alpha, n_iter, mode, config, n_lambda, min_ratio,
                       standardize_x=standardize_x)
    seq = full.fit.lambda_seq
    folds = folds or make_folds(data.n, nfolds, data.obs_group_ids, seed)

    def fit_fn(train):
        return fwelnet_fit(train, z, alpha, n_iter, mode, config, lambda_seq=seq,
                           standardize_x=standardize_x)

    return full, cross_validate(data, fit_fn, metric, folds, seq.values, n_jobs)
