"""Seeded simulation settings, scoring and experiment batteries."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import fwelnet_fit
from .cv import cv_elnet, cv_fwelnet, make_folds
from .data import Dataset
from .groups import GroupStructure, grouped_indicator_z
from .multitask import multitask_fit

log = logging.getLogger(__name__)

SETTINGS = ("setting1", "setting2_one_group", "setting2_four_groups", "setting3", "fig1", "multitask")

# (n, p, default snr_y)
_SHAPES = {
    "setting1": (100, 50, 2.0),
    "setting2_one_group": (100, 150, 2.0),
    "setting2_four_groups": (100, 150, 2.0),
    "setting3": (100, 100, 2.0),
    "fig1": (200, 100, 2.0),
    "multitask": (150, 50, 0.5),
}


@dataclass(frozen=True)
class SimConfig:
    setting: str = "setting1"
    n: Optional[int] = None
    p: Optional[int] = None
    snr_y: Optional[float] = None
    snr_z: float = 10.0
    n_runs: int = 30
    seed: int = 0
    n_test: int = 10000
    alpha: float = 1.0
    n_iter: int = 1
    aggregate: str = "mean"
    nfolds: int = 10
    n_lambda: int = 100
    n_outer: int = 3
    snr_y2: float = 1.5
    include_mt_lasso: bool = True

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}; valid: {', '.join(SETTINGS)}")
        n, p, snr = _SHAPES[self.setting]
        if self.n is None:
            object.__setattr__(self, "n", n)
        if self.p is None:
            object.__setattr__(self, "p", p)
        if self.snr_y is None:
            object.__setattr__(self, "snr_y", snr)
        if self.snr_y <= 0 or self.snr_z <= 0 or self.snr_y2 <= 0:
            raise ValueError("SNRs must be positive")
        if self.n_runs < 1:
            raise ValueError("n_runs must be at least 1")


@dataclass
class SimData:
    train: Dataset
    z: Optional[np.ndarray]
    x_test: np.ndarray
    mu_test: np.ndarray
    beta: np.ndarray
    sigma: float
    # multitask only
    y2: Optional[np.ndarray] = None
    mu2_test: Optional[np.ndarray] = None
    beta2: Optional[np.ndarray] = None
    sigma2: Optional[float] = None


def run_rng(seed: int, run_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, run_index])


def _noise_sd(beta, snr) -> float:
    return float(np.sqrt(np.sum(beta**2) / snr))


def _signs(rng, size):
    return rng.choice([-1.0, 1.0], size=size)


def generate(config: SimConfig, run_index: int) -> SimData:
    """Draw one training set, its feature information and a test set."""
    rng = run_rng(config.seed, run_index)
    n, p, s = config.n, config.p, config.setting
    beta2 = None
    if s == "setting1":
        beta = np.zeros(p)
        beta[:5], beta[5:10] = 2.0, -1.0
    elif s.startswith("setting2"):
        beta = np.zeros(p)
        k = 10 if s == "setting2_one_group" else 40
        beta[:k] = 3.0 * _signs(rng, k)
    elif s == "setting3":
        beta = np.zeros(p)
        beta[:10] = 2.0
    elif s == "fig1":
        beta = np.zeros(p)
        beta[:10], beta[10:20] = 4.0, -2.0
    else:
        beta = np.zeros(p)
        beta[:5] = 5.0 * _signs(rng, 5)
        beta[5:10] = 2.0 * _signs(rng, 5)
        beta2 = np.zeros(p)
        beta2[:5] = 5.0 * _signs(rng, 5)
        beta2[10:15] = 2.0 * _signs(rng, 5)

    x = rng.standard_normal((n, p))
    sigma = _noise_sd(beta, config.snr_y)
    y = x @ beta + sigma * rng.standard_normal(n)

    z = None
    y2 = sigma2 = None
    if s == "setting1":
        # population variance over the p entries of |beta|
        sz = np.sqrt(np.var(np.abs(beta)) / config.snr_z)
        z = np.column_stack([np.abs(beta) + sz * rng.standard_normal(p), np.ones(p)])
    elif s.startswith("setting2") or s == "fig1":
        z = grouped_indicator_z(GroupStructure(np.arange(p) // 10))
    elif s == "setting3":
        z = np.column_stack([rng.standard_normal((p, 10)), np.ones(p)])
    else:
        sigma2 = _noise_sd(beta2, config.snr_y2)
        y2 = x @ beta2 + sigma2 * rng.standard_normal(n)

    x_test = rng.standard_normal((config.n_test, p))
    data = SimData(Dataset(x, y), z, x_test, x_test @ beta, beta, sigma)
    if beta2 is not None:
        data.y2, data.mu2_test, data.beta2, data.sigma2 = y2, x_test @ beta2, beta2, sigma2
    return data


def test_mse(y_hat, mu) -> float:
    y_hat = np.asarray(y_hat, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if y_hat.shape != mu.shape:
        raise ValueError("prediction and mean vectors differ in length")
    return float(np.mean((y_hat - mu) ** 2))


test_mse.__test__ = False  # keep pytest from collecting this as a test


def tpr_fpr(beta_hat, beta_true) -> tuple[float, float]:
    """Support recovery rates; 'selected' means exactly nonzero."""
    beta_hat = np.asarray(beta_hat)
    beta_true = np.asarray(beta_true)
    if beta_hat.shape != beta_true.shape:
        raise ValueError("coefficient vectors differ in length")
    sel = beta_hat != 0
    true = beta_true != 0
    if not true.any() or true.all():
        raise ValueError("beta_true needs at least one zero and one nonzero entry")
    return float(np.mean(sel[true])), float(np.mean(sel[~true]))


@dataclass
class MethodScore:
    method: str
    test_mse: float
    tpr: float
    fpr: float
    lambda_: float = float("nan")
    theta: Optional[list] = None


@dataclass
class SimRunResult:
    run: int
    scores: list = field(default_factory=list)
    weights: Optional[np.ndarray] = None     # learned penalty factors (fig1)
    error: Optional[str] = None


def _score(method, b0, beta, sim: SimData, mu, beta_true, lam=float("nan"), theta=None):
    pred = b0 + sim.x_test @ beta
    tpr, fpr = tpr_fpr(beta, beta_true)
    return MethodScore(method, test_mse(pred, mu), tpr, fpr, lam,
                       None if theta is None else [float(t) for t in theta])


def _cv_pick(model, cv):
    b0, beta = model.coef_path()
    return float(b0[cv.index_min]), beta[:, cv.index_min]


def multi_response_lasso_path(x, y_mat, lambdas, tol=1e-9, max_iter=20000):
    """Row-sparse multi-response lasso by accelerated proximal gradient.

    Minimizes 0.5*||Y - 1 b0' - X B||_F^2 + lam * sum_j ||B[j, :]||_2 at
    each lambda (warm-started). A small-scale reference, not a production
    solver. Returns intercepts with shape (m, B) and coefficients (m, p, B).
    """
    xm, ym = x.mean(axis=0), y_mat.mean(axis=0)
    xc, yc = x - xm, y_mat - ym
    step = 1.0 / np.linalg.norm(xc, 2) ** 2
    p, nb = x.shape[1], y_mat.shape[1]
    coef = np.zeros((p, nb))
    out = np.zeros((len(lambdas), p, nb))
    for i, lam in enumerate(lambdas):
        z = coef.copy()
        t = 1.0
        for _ in range(max_iter):
            grad = xc.T @ (xc @ z - yc)
            u = z - step * grad
            norms = np.linalg.norm(u, axis=1, keepdims=True)
            shrink = np.maximum(1.0 - step * lam / np.maximum(norms, 1e-300), 0.0)
            new = shrink * u
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            z = new + ((t - 1.0) / t_new) * (new - coef)
            diff = np.max(np.abs(new - coef))
            coef, t = new, t_new
            if diff < tol * max(1.0, np.max(np.abs(coef))):
                break
        out[i] = coef
    intercepts = ym[None, :] - np.einsum("p,mpb->mb", xm, out)
    return intercepts, out


def cv_multi_response_lasso(x, y_mat, folds, n_lambda=30, min_ratio=1e-3):
    """CV (summed MSE over responses) for the multi-response lasso reference."""
    xc = x - x.mean(axis=0)
    yc = y_mat - y_mat.mean(axis=0)
    lmax = float(np.max(np.linalg.norm(xc.T @ yc, axis=1)))
    lambdas = lmax * np.exp(np.linspace(0.0, np.log(min_ratio), n_lambda))
    err = np.zeros((folds.k, n_lambda))
    for f in range(folds.k):
        test = folds.rows(f)
        train = np.flatnonzero(folds.fold_of != f)
        b0, coef = multi_response_lasso_path(x[train], y_mat[train], lambdas)
        pred = b0[:, None, :] + np.einsum("np,mpb->mnb", x[test], coef)
        err[f] = np.mean(np.sum((pred - y_mat[test][None]) ** 2, axis=2), axis=1)
    best = int(np.argmin(err.mean(axis=0)))
    b0, coef = multi_response_lasso_path(x, y_mat, lambdas[: best + 1])
    return b0[-1], coef[-1], float(lambdas[best])


def _run_single(config: SimConfig, run_index: int) -> SimRunResult:
    sim = generate(config, run_index)
    res = SimRunResult(run_index)
    data = sim.train
    folds = make_folds(data.n, config.nfolds, None, config.seed * 100003 + run_index)

    if config.setting == "multitask":
        return _run_multitask(config, sim, res, folds)

    res.scores.append(_score("null", data.y.mean(), np.zeros(data.p), sim, sim.mu_test, sim.beta))
    lasso, cvl = cv_elnet(data, 1.0, folds=folds, n_lambda=config.n_lambda)
    b0, beta = _cv_pick(lasso, cvl)
    res.scores.append(_score("lasso", b0, beta, sim, sim.mu_test, sim.beta, cvl.lambda_min))
    fw, cvf = cv_fwelnet(data, sim.z, config.alpha, config.n_iter, config.aggregate,
                         folds=folds, n_lambda=config.n_lambda)
    b0, beta = _cv_pick(fw, cvf)
    res.scores.append(_score("fwelnet", b0, beta, sim, sim.mu_test, sim.beta, cvf.lambda_min, fw.theta))
    if config.setting == "fig1":
        res.weights = fw.weights
    return res


def _run_multitask(config, sim: SimData, res: SimRunResult, folds) -> SimRunResult:
    x = sim.train.x
    ys = (sim.train.y, sim.y2)
    targets = ((sim.mu_test, sim.beta), (sim.mu2_test, sim.beta2))
    mt = multitask_fit(x, ys[0], ys[1], n_outer=config.n_outer, alpha=config.alpha,
                       n_iter=config.n_iter, mode=config.aggregate, n_lambda=config.n_lambda,
                       folds=folds)
    for r in (1, 2):
        mu, bt = targets[r - 1]
        res.scores.append(_score(f"null/y{r}", ys[r - 1].mean(), np.zeros(x.shape[1]), sim, mu, bt))
        if config.alpha == 1.0:
            # the alternating fit starts from exactly the individual CV lasso
            b0, beta = mt.start_intercepts[r - 1], mt.snapshots[0][r - 1]
        else:
            m, cv = cv_elnet(Dataset(x, ys[r - 1]), 1.0, folds=folds, n_lambda=config.n_lambda)
            b0, beta = _cv_pick(m, cv)
        res.scores.append(_score(f"ind_lasso/y{r}", b0, beta, sim, mu, bt))
    if config.include_mt_lasso:
        b0, coef, lam = cv_multi_response_lasso(x, np.column_stack(ys), folds)
        for r in (1, 2):
            mu, bt = targets[r - 1]
            res.scores.append(_score(f"mt_lasso/y{r}", b0[r - 1], coef[:, r - 1], sim, mu, bt, lam))
    res.scores.append(_score("fwelnet/y1", mt.intercept1, mt.beta1, sim, *targets[0],
                             theta=mt.thetas1[-1] if mt.thetas1 else None))
    res.scores.append(_score("fwelnet/y2", mt.intercept2, mt.beta2, sim, *targets[1],
                             theta=mt.thetas2[-1] if mt.thetas2 else None))
    return res


def summarize(results: list[SimRunResult]) -> dict:
    """Median and quartiles of test MSE, TPR and FPR per method."""
    ok = [r for r in results if r.error is None]
    methods: dict[str, list[MethodScore]] = {}
    for r in ok:
        for s in r.scores:
            methods.setdefault(s.method, []).append(s)
    summary = {}
    for name, scores in methods.items():
        entry = {"n": len(scores)}
        for key in ("test_mse", "tpr", "fpr"):
            vals = np.array([getattr(s, key) for s in scores])
            q25, med, q75 = np.percentile(vals, [25, 50, 75])
            entry[key] = {"median": float(med), "q25": float(q25), "q75": float(q75),
                          "mean": float(vals.mean())}
        summary[name] = entry
    return {
        "n_runs": len(results),
        "n_failed": len(results) - len(ok),
        "failures": [{"run": r.run, "error": r.error} for r in results if r.error is not None],
        "methods": summary,
    }


def run_experiment(config: SimConfig, n_jobs: int = 1) -> tuple[list[SimRunResult], dict]:
    """Run every replicate; failures are recorded and skipped."""

    def one(i):
        try:
            return _run_single(config, i)
        except Exception as exc:  # recorded per run, summary reports the count
            log.warning("run %d failed: %s", i, exc)
            return SimRunResult(i, error=f"{type(exc).__name__}: {exc}")

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(one, range(config.n_runs)))
    else:
        results = [one(i) for i in range(config.n_runs)]
    return results, summarize(results)


def fig1_weights(config: SimConfig, run_index: int, n_iter: int = 1) -> np.ndarray:
    """Penalty factors learned by fwelnet on one draw of the grouped demo."""
    if config.setting != "fig1":
        config = replace(config, setting="fig1", n=None, p=None, snr_y=None)
    sim = generate(config, run_index)
    model = fwelnet_fit(sim.train, sim.z, config.alpha, n_iter, config.aggregate,
                        n_lambda=config.n_lambda)
    return model.weights


def group_means(weights, group_size: int = 10) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    return w.reshape(-1, group_size).mean(axis=1)
