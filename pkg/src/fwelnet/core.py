"""Feature-weighted elastic net.

Penalty factors come from feature side-information ``z`` (p x K) through a
score vector theta:

    w_j(theta) = sum_l exp(z_l . theta) / (p * exp(z_j . theta))

theta starts at zero (plain elastic net) and is moved by gradient steps on
the penalized objective, averaged (or median-ed) across the lambda path,
with the coefficient path held fixed during each step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .data import (
    Dataset,
    LambdaSequence,
    StandardizationInfo,
    destandardize,
    make_lambda_sequence,
    standardize,
)
from .solver import (
    ElnetFit,
    SolverConfig,
    fit_path,
    working_response,
)

log = logging.getLogger(__name__)

AGGREGATES = ("mean", "median")
MAX_HALVINGS = 20


@dataclass(frozen=True)
class FeatureInfo:
    z: np.ndarray
    column_names: Optional[Sequence[str]] = None

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if z.ndim != 2:
            raise ValueError(f"z must be a p x K matrix, got shape {z.shape}")
        if not np.all(np.isfinite(z)):
            raise ValueError("z contains non-finite entries")
        if self.column_names is not None and len(self.column_names) != z.shape[1]:
            raise ValueError("column_names length does not match the columns of z")
        object.__setattr__(self, "z", z)

    @property
    def p(self) -> int:
        return self.z.shape[0]

    @property
    def k(self) -> int:
        return self.z.shape[1]


def _as_z(zmat) -> np.ndarray:
    return zmat.z if isinstance(zmat, FeatureInfo) else FeatureInfo(zmat).z


def scores(zmat, theta) -> np.ndarray:
    z = _as_z(zmat)
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.shape[0] != z.shape[1]:
        raise ValueError(f"theta has length {theta.shape[0]}, z has {z.shape[1]} columns")
    return z @ theta


def penalty_weights(zmat, theta) -> np.ndarray:
    """Penalty factors w(theta); every entry is at least 1/p."""
    s = scores(zmat, theta)
    # log w_j = logsumexp(s) - s_j - log p; logsumexp subtracts max(s) internally
    return np.exp(logsumexp(s) - s - np.log(s.size))


def penalty_terms(beta, alpha: float) -> np.ndarray:
    """alpha*|b| + (1-alpha)/2*b^2, elementwise (works on p x m paths)."""
    beta = np.asarray(beta, dtype=float)
    return alpha * np.abs(beta) + 0.5 * (1.0 - alpha) * beta**2


def _score_gradient_factors(z: np.ndarray, theta: np.ndarray):
    """Return (w, d) with d[j, k] = zbar_k - z_jk, zbar the softmax-weighted column mean.

    dw_j/dtheta_k = w_j * d[j, k]. Columns are re-referenced to their first
    entry so that a constant column gives d == 0 exactly.
    """
    s = z @ theta
    probs = np.exp(s - logsumexp(s))
    w = np.exp(logsumexp(s) - s - np.log(s.size))
    zc = z - z[0]
    d = (probs @ zc)[None, :] - zc
    return w, d


def theta_gradient(zmat, theta, beta, lam, alpha: float) -> np.ndarray:
    """Gradient of the penalized objective with respect to theta.

    ``beta`` may be a single coefficient vector (with scalar ``lam``) or a
    p x m path with a length-m ``lam``; the latter returns an m x K matrix
    of per-lambda gradients.
    """
    z = _as_z(zmat)
    theta = np.asarray(theta, dtype=float).ravel()
    w, d = _score_gradient_factors(z, theta)
    c = penalty_terms(beta, alpha)
    if c.ndim == 1:
        return float(lam) * ((c * w) @ d)
    lam = np.asarray(lam, dtype=float)
    return lam[:, None] * ((c * w[:, None]).T @ d)


def aggregate_gradient(per_lambda_grads, mode: str = "mean") -> np.ndarray:
    grads = np.atleast_2d(np.asarray(per_lambda_grads, dtype=float))
    if grads.shape[0] == 0:
        raise ValueError("need at least one gradient")
    return _aggregate(grads, mode, axis=0)


def _aggregate(values, mode, axis=None):
    if mode == "mean":
        return np.mean(values, axis=axis)
    if mode == "median":
        return np.median(values, axis=axis)
    raise ValueError(f"unknown aggregation {mode!r}; expected one of {AGGREGATES}")


def backtracking_step(theta, delta, eval_aggregate_objective: Callable[[np.ndarray], float],
                      mode: str = "mean", current: Optional[float] = None):
    """Step theta - eta*delta with eta = 1, 1/2, 1/4, ... until the objective drops.

    Acceptance is a plain strict decrease. After ``MAX_HALVINGS`` halvings
    without one, theta comes back unchanged with ``accepted`` False.
    ``mode`` is carried for the caller's benefit; the callback already
    aggregates across lambdas.

    Returns (theta_new, eta, accepted).
    """
    theta = np.asarray(theta, dtype=float)
    delta = np.asarray(delta, dtype=float)
    f0 = eval_aggregate_objective(theta) if current is None else current
    eta = 1.0
    for _ in range(MAX_HALVINGS + 1):
        cand = theta - eta * delta
        if eval_aggregate_objective(cand) < f0:
            return cand, eta, True
        eta *= 0.5
    return theta.copy(), 0.0, False


def path_objectives(family, x, y, fit_intercepts, fit_betas, lambdas, weights, alpha) -> np.ndarray:
    """Penalized objective at each path point for the given penalty factors."""
    eta = fit_intercepts[None, :] + x @ fit_betas
    if family == "gaussian":
        loss = 0.5 * np.sum((y[:, None] - eta) ** 2, axis=0)
    else:
        loss = np.sum(np.logaddexp(0.0, eta) - y[:, None] * eta, axis=0)
    # huge (finite) trial weights may overflow to inf, which line search rejects
    with np.errstate(over="ignore"):
        pen = lambdas * (weights @ penalty_terms(fit_betas, alpha))
    return loss + pen


@dataclass(frozen=True)
class FwelnetModel:
    """Result of a fwelnet fit.

    ``history[0]`` is the aggregate objective of the plain elastic net
    path at theta = 0; each accepted iteration appends the aggregate at the
    updated (theta, path).
    """

    theta: np.ndarray
    fit: ElnetFit
    weights: np.ndarray
    history: np.ndarray
    alpha: float
    n_iter: int
    aggregate: str
    iterations_run: int
    step_sizes: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def lambdas(self) -> np.ndarray:
        return self.fit.lambdas

    def coef_path(self):
        return self.fit.coef_path()

    def linear_predictor(self, x) -> np.ndarray:
        return self.fit.linear_predictor(x)


def _prepare(data: Dataset, zmat, standardize_x: bool):
    z = _as_z(zmat)
    if z.shape[0] != data.p:
        raise ValueError(f"z has {z.shape[0]} rows but x has {data.p} columns")
    std, info = standardize(data, scale=standardize_x)
    return std, info, z


def fwelnet_fit(
    data: Dataset,
    zmat,
    alpha: float = 1.0,
    n_iter: int = 1,
    mode: str = "mean",
    config: Optional[SolverConfig] = None,
    n_lambda: int = 100,
    min_ratio: Optional[float] = None,
    lambda_seq: Optional[LambdaSequence] = None,
    standardize_x: bool = True,
) -> FwelnetModel:
    """Fit fwelnet by aggregated gradient steps on theta.

    1. Build the lambda sequence with unit penalty factors (unless given).
    2. Solve the plain elastic net path; theta = 0.
    3. ``n_iter`` times: aggregate the per-lambda theta gradients at the
       current path, take a backtracking step on theta, then re-solve the
       path with the new penalty factors, each lambda warm-started from
       its previous solution. A rejected step ends the loop early.

    Works for both families; theta enters only through the penalty.
    """
    if n_iter < 0:
        raise ValueError("n_iter must be >= 0")
    if mode not in AGGREGATES:
        raise ValueError(f"unknown aggregation {mode!r}; expected one of {AGGREGATES}")
    config = SolverConfig(**{**(config or SolverConfig()).__dict__, "alpha": alpha, "family": data.family})
    std, info, z = _prepare(data, zmat, standardize_x)
    p, k_dim = z.shape
    theta = np.zeros(k_dim)
    w = np.ones(p)
    if lambda_seq is None:
        lambda_seq = make_lambda_sequence(std.x, working_response(std), w, alpha, n_lambda,
                                          min_ratio, info.constant)
    fit = fit_path(std, w, config, lambda_seq, info=info)
    lambdas = lambda_seq.values
    x, y = std.x, std.y

    def aggregate_at(th, cur_fit):
        with np.errstate(over="ignore"):
            wts = penalty_weights(z, th)
        if not np.all(np.isfinite(wts)):
            return np.inf
        vals = path_objectives(data.family, x, y, cur_fit.intercepts, cur_fit.betas, lambdas, wts, alpha)
        with np.errstate(over="ignore"):
            return float(_aggregate(vals, mode))

    history = [aggregate_at(theta, fit)]
    steps = []
    done = 0
    for it in range(n_iter):
        grads = theta_gradient(z, theta, fit.betas, lambdas, alpha)
        delta = aggregate_gradient(grads, mode)
        theta_new, eta, accepted = backtracking_step(
            theta, delta, lambda th: aggregate_at(th, fit), mode, current=history[-1]
        )
        if not accepted:
            log.info("iteration %d: line search found no decrease; stopping", it + 1)
            break
        theta = theta_new
        w = penalty_weights(z, theta)
        fit = fit_path(std, w, config, lambda_seq, warm=fit, info=info)
        history.append(aggregate_at(theta, fit))
        steps.append(eta)
        done += 1
    return FwelnetModel(
        theta=theta,
        fit=fit,
        weights=fit.weights,
        history=np.array(history),
        alpha=alpha,
        n_iter=n_iter,
        aggregate=mode,
        iterations_run=done,
        step_sizes=np.array(steps),
    )


def fwelnet_fit_glm(data: Dataset, zmat, alpha: float = 1.0, n_iter: int = 1, mode: str = "mean",
                    config: Optional[SolverConfig] = None, **kwargs) -> FwelnetModel:
    if data.family != "binomial":
        raise ValueError("fwelnet_fit_glm expects a binomial dataset")
    return fwelnet_fit(data, zmat, alpha, n_iter, mode, config, **kwargs)


@dataclass(frozen=True)
class PerLambdaResult:
    """Separate theta per lambda, from alternating minimization."""

    lambda_seq: LambdaSequence
    thetas: np.ndarray        # m x K
    intercepts: np.ndarray    # original scale
    betas: np.ndarray         # original scale, p x m
    betas_std: np.ndarray
    iterations: np.ndarray
    objectives: np.ndarray    # working-scale objective at the final (theta_i, beta_i)
    info: Optional[StandardizationInfo] = None

    @property
    def lambdas(self):
        return self.lambda_seq.values

    def linear_predictor(self, x):
        return self.intercepts[None, :] + np.asarray(x, dtype=float) @ self.betas


def fwelnet_fit_per_lambda(
    data: Dataset,
    zmat,
    alpha: float = 1.0,
    config: Optional[SolverConfig] = None,
    max_iter: int = 50,
    tol: float = 1e-6,
    n_lambda: int = 100,
    min_ratio: Optional[float] = None,
    lambda_seq: Optional[LambdaSequence] = None,
    standardize_x: bool = True,
) -> PerLambdaResult:
    """Alternating minimization over (theta, beta) separately at each lambda.

    For each lambda: a backtracking gradient step on theta with beta
    fixed, then an elastic-net re-solve at that lambda alone with beta
    fixed at the new penalty factors. Stops when the relative objective
    decrease falls below ``tol``, the line search fails, or after
    ``max_iter`` rounds. Much slower than ``fwelnet_fit``.
    """
    config = SolverConfig(**{**(config or SolverConfig()).__dict__, "alpha": alpha, "family": data.family})
    std, info, z = _prepare(data, zmat, standardize_x)
    p, k_dim = z.shape
    if lambda_seq is None:
        lambda_seq = make_lambda_sequence(std.x, working_response(std), np.ones(p), alpha, n_lambda,
                                          min_ratio, info.constant)
    base = fit_path(std, np.ones(p), config, lambda_seq, info=info)
    m = lambda_seq.n_lambda
    thetas = np.zeros((m, k_dim))
    b0s = base.intercepts.copy()
    betas = base.betas.copy()
    iters = np.zeros(m, dtype=int)
    objs = np.zeros(m)
    x, y = std.x, std.y
    for i, lam in enumerate(lambda_seq.values):
        single = LambdaSequence(np.array([lam]), lambda_seq.min_ratio)
        theta = np.zeros(k_dim)
        b0, beta = b0s[i:i + 1].copy(), betas[:, i:i + 1].copy()

        def obj(th):
            with np.errstate(over="ignore"):
                wts = penalty_weights(z, th)
            if not np.all(np.isfinite(wts)):
                return np.inf
            return float(path_objectives(data.family, x, y, b0, beta, single.values, wts, alpha)[0])

        current = obj(theta)
        for it in range(max_iter):
            delta = theta_gradient(z, theta, beta, single.values, alpha)[0]
            theta_new, _, accepted = backtracking_step(theta, delta, obj, current=current)
            if not accepted:
                break
            theta = theta_new
            sub = fit_path(std, penalty_weights(z, theta), config, single, warm=(b0, beta), info=info)
            b0, beta = sub.intercepts, sub.betas
            new = obj(theta)
            iters[i] = it + 1
            change = (current - new) / max(abs(current), 1e-300)
            current = new
            if change < tol:
                break
        thetas[i] = theta
        b0s[i] = b0[0]
        betas[:, i] = beta[:, 0]
        objs[i] = current
    obeta, ob0 = destandardize(betas, b0s, info)
    return PerLambdaResult(lambda_seq, thetas, ob0, obeta, betas, iters, objs, info)
