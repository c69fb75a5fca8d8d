"""Weighted elastic-net path solver (Gaussian and binomial families)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .data import (
    ALPHA_FLOOR,
    Dataset,
    LambdaSequence,
    StandardizationInfo,
    destandardize,
    lambda_max,
    make_lambda_sequence,
    standardize,
)


class NumericalError(RuntimeError):
    """Raised when a fit produces non-finite values."""


@dataclass(frozen=True)
class SolverConfig:
    """Coordinate-descent settings.

    ``tol`` bounds the largest absolute change of a (standardized)
    coefficient over a full pass. For the binomial family the outer
    reweighting loop stops once the deviance moves by less than
    ``dev_tol_rel`` times the null deviance. ``polish_every`` (Gaussian
    only) sets how many active-set passes run between exact solves on the
    current support; 0 turns polishing off.
    """

    alpha: float = 1.0
    tol: float = 1e-7
    max_passes: int = 100000
    family: str = "gaussian"
    max_outer: int = 25
    dev_tol_rel: float = 1e-8
    polish_every: int = 10

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_passes < 1:
            raise ValueError("max_passes must be at least 1")


def validate_weights(weights, p: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape[0] != p:
        raise ValueError(f"expected {p} penalty factors, got {w.shape[0]}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("penalty factors must be finite and nonnegative")
    return w


def soft_threshold(u, t):
    """sign(u) * max(|u| - t, 0)."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("threshold must be nonnegative")
    return np.sign(u) * np.maximum(np.abs(u) - t, 0.0)


def negative_log_likelihood(family: str, y, eta) -> float:
    """Loss term of the objective: half RSS (gaussian) or binomial NLL."""
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if y.shape != eta.shape:
        raise ValueError(f"length mismatch: y {y.shape} vs eta {eta.shape}")
    if family == "gaussian":
        return 0.5 * float(np.sum((y - eta) ** 2))
    if family == "binomial":
        # log(1 + e^eta) = logaddexp(0, eta) stays finite for large |eta|
        return float(np.sum(np.logaddexp(0.0, eta) - y * eta))
    raise ValueError(f"unknown family {family!r}")


def penalty_value(beta, weights, lam: float, alpha: float) -> float:
    beta = np.asarray(beta)
    return float(lam * np.sum(weights * (alpha * np.abs(beta) + 0.5 * (1 - alpha) * beta**2)))


def objective(family, x, y, intercept, beta, weights, lam, alpha) -> float:
    eta = intercept + x @ beta
    return negative_log_likelihood(family, y, eta) + penalty_value(beta, weights, lam, alpha)


@dataclass(frozen=True)
class ElnetFit:
    """A solved path.

    ``intercepts`` and ``betas`` are on the working (standardized) scale of
    the data the solver saw; ``info`` maps them back to the original
    scale, which is what ``coef_path`` and ``predict`` use. ``objective[i]``
    is the penalized objective on the working scale.
    """

    lambda_seq: LambdaSequence
    intercepts: np.ndarray
    betas: np.ndarray
    objective: np.ndarray
    n_passes: np.ndarray
    converged: np.ndarray
    weights: np.ndarray
    alpha: float
    family: str = "gaussian"
    saturated: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    info: Optional[StandardizationInfo] = None

    @property
    def lambdas(self) -> np.ndarray:
        return self.lambda_seq.values

    def coef_path(self) -> tuple[np.ndarray, np.ndarray]:
        """Original-scale (intercepts, betas)."""
        if self.info is None:
            return self.intercepts, self.betas
        beta, b0 = destandardize(self.betas, self.intercepts, self.info)
        return b0, beta

    def linear_predictor(self, x) -> np.ndarray:
        """n x m matrix of linear predictors over the whole path."""
        b0, beta = self.coef_path()
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[1] != beta.shape[0]:
            raise ValueError(f"x has {x.shape[1]} columns, model expects {beta.shape[0]}")
        return b0[None, :] + x @ beta


def _resolve_init(warm, p, m):
    if warm is None:
        return np.zeros(m), np.zeros((p, m)), False
    if isinstance(warm, ElnetFit):
        b0, beta = warm.intercepts, warm.betas
    else:
        b0, beta = warm
    b0 = np.ascontiguousarray(b0, dtype=float)
    beta = np.ascontiguousarray(beta, dtype=float)
    if beta.shape != (p, m) or b0.shape != (m,):
        raise ValueError(f"warm start has shape {beta.shape}, expected {(p, m)}")
    return b0, beta, True


def fit_path(
    data: Dataset,
    weights,
    config: SolverConfig,
    lambda_seq: LambdaSequence,
    warm=None,
    info: Optional[StandardizationInfo] = None,
    exclude: Optional[np.ndarray] = None,
) -> ElnetFit:
    """Solve the weighted elastic net at every lambda of ``lambda_seq``.

    ``data`` is expected to be standardized already. The path runs from the
    largest lambda down, each point warm-started from the previous one,
    or from the matching column of ``warm`` (an ElnetFit or an
    ``(intercepts, betas)`` pair) when given. Columns flagged in
    ``exclude`` (or ``info.constant``) keep a zero coefficient.
    """
    if data.family != config.family:
        config = SolverConfig(**{**config.__dict__, "family": data.family})
    x = np.asfortranarray(data.x)
    y = np.ascontiguousarray(data.y)
    n, p = x.shape
    w = validate_weights(weights, p)
    lambdas = lambda_seq.values
    m = lambdas.size
    if exclude is None:
        exclude = info.constant if info is not None and info.constant.size == p else np.zeros(p, bool)
    skip = np.ascontiguousarray(exclude, dtype=np.bool_)
    init_b0, init_beta, use_init = _resolve_init(warm, p, m)
    alpha = config.alpha

    # Points at or above lambda_max have the all-zero solution. Check with the
    # same arithmetic that built the sequence so lambda_max itself is exact.
    zero_upto = 0
    if alpha >= ALPHA_FLOOR and not np.any((w == 0) & ~skip):
        lmax = lambda_max(data.x, working_response(data), w, alpha, skip)
        zero_upto = int(np.sum(lambdas >= lmax)) if lmax > 0 else m

    if data.family == "gaussian":
        b0s, betas, passes, conv = _kernels.gaussian_path(
            x, y, w, alpha, lambdas, init_b0, init_beta, use_init,
            skip, zero_upto, config.tol, config.max_passes, config.polish_every,
        )
        saturated = np.zeros(m, dtype=bool)
    else:
        ybar = y.mean()
        pb = min(max(ybar, _kernels.PROB_EPS), 1 - _kernels.PROB_EPS)
        null_dev = negative_log_likelihood("binomial", y, np.full(n, np.log(pb / (1 - pb))))
        if ybar in (0.0, 1.0):
            # single class: nothing to fit beyond the clamped intercept
            zero_upto = m
        b0s, betas, passes, conv, saturated = _kernels.binomial_path(
            x, y, w, alpha, lambdas, init_b0, init_beta, use_init,
            skip, zero_upto, config.tol, config.max_passes, config.max_outer,
            config.dev_tol_rel * null_dev, null_dev, 1e6,
        )
        if ybar in (0.0, 1.0):
            saturated = np.ones(m, dtype=bool)
    if not (np.all(np.isfinite(betas)) and np.all(np.isfinite(b0s))):
        raise NumericalError("coordinate descent produced non-finite coefficients")
    obj = np.array([
        objective(data.family, x, y, b0s[k], betas[:, k], w, lambdas[k], alpha)
        for k in range(m)
    ])
    return ElnetFit(
        lambda_seq=lambda_seq,
        intercepts=b0s,
        betas=betas,
        objective=obj,
        n_passes=passes,
        converged=conv,
        weights=w,
        alpha=alpha,
        family=data.family,
        saturated=saturated,
        info=info,
    )


def fit_path_binomial(data: Dataset, weights, config: SolverConfig, lambda_seq: LambdaSequence,
                      warm=None, info=None, exclude=None) -> ElnetFit:
    if data.family != "binomial":
        raise ValueError("fit_path_binomial requires a binomial dataset")
    return fit_path(data, weights, config, lambda_seq, warm, info, exclude)


def working_response(data: Dataset) -> np.ndarray:
    """Response used for lambda_max: y minus its mean (both families)."""
    return data.y - data.y.mean()


def fit_elnet(
    dataset: Dataset,
    weights=None,
    alpha: float = 1.0,
    n_lambda: int = 100,
    min_ratio: Optional[float] = None,
    lambda_seq: Optional[LambdaSequence] = None,
    standardize_x: bool = True,
    config: Optional[SolverConfig] = None,
) -> ElnetFit:
    """Standardize, build a lambda sequence if needed, and solve the path."""
    config = config or SolverConfig(alpha=alpha, family=dataset.family)
    if config.alpha != alpha or config.family != dataset.family:
        config = SolverConfig(**{**config.__dict__, "alpha": alpha, "family": dataset.family})
    std, info = standardize(dataset, scale=standardize_x)
    w = np.ones(dataset.p) if weights is None else validate_weights(weights, dataset.p)
    if lambda_seq is None:
        lambda_seq = make_lambda_sequence(
            std.x, working_response(std), w, alpha, n_lambda, min_ratio, info.constant
        )
    return fit_path(std, w, config, lambda_seq, info=info)


def kkt_violation(fit: ElnetFit, data: Dataset, weights=None, alpha: Optional[float] = None) -> np.ndarray:
    """Largest KKT residual at each path point, per observation.

    Residuals are computed on the working scale of ``data`` (the
    standardized data the path was solved on) and divided by n, the
    squared column norm of a standardized feature, so they are comparable
    with the coefficient-change tolerance. The intercept condition
    (residuals sum to zero) is included.
    """
    w = fit.weights if weights is None else validate_weights(weights, data.p)
    alpha = fit.alpha if alpha is None else alpha
    x, y = data.x, data.y
    n = data.n
    skip = np.zeros(data.p, bool)
    if fit.info is not None and fit.info.constant.size == data.p:
        skip = fit.info.constant
    out = np.zeros(fit.lambdas.size)
    for k, lam in enumerate(fit.lambdas):
        beta = fit.betas[:, k]
        eta = fit.intercepts[k] + x @ beta
        if data.family == "binomial":
            resid = y - 1.0 / (1.0 + np.exp(-eta))
        else:
            resid = y - eta
        g = x.T @ resid
        nz = beta != 0
        viol = np.where(
            nz,
            np.abs(g - lam * w * (1 - alpha) * beta - lam * w * alpha * np.sign(beta)),
            np.maximum(np.abs(g) - lam * w * alpha, 0.0),
        )
        viol[skip] = 0.0
        out[k] = max(float(viol.max(initial=0.0)), abs(float(resid.sum()))) / n
    return out


def resolve_lambda_index(lambdas: np.ndarray, lambda_index=None, lambda_value=None) -> int:
    if (lambda_index is None) == (lambda_value is None):
        raise ValueError("give exactly one of lambda_index or lambda_value")
    if lambda_index is not None:
        idx = int(lambda_index)
        if not -lambdas.size <= idx < lambdas.size:
            raise ValueError(f"lambda_index {idx} out of range for a path of {lambdas.size}")
        return idx % lambdas.size
    rel = np.abs(lambdas - lambda_value) / np.maximum(np.abs(lambdas), 1e-300)
    idx = int(np.argmin(rel))
    if rel[idx] > 1e-9 and not (lambda_value == 0 and lambdas[idx] == 0):
        raise ValueError(f"lambda {lambda_value!r} is not on the fitted path")
    return idx


def predict_at(b0: float, beta, x_new, family: str = "gaussian"):
    """Prediction from one original-scale coefficient vector.

    Gaussian returns the linear predictor; binomial returns a pair
    (linear predictor, probability).
    """
    beta = np.ascontiguousarray(beta, dtype=float)
    x_new = np.asarray(x_new, dtype=float)
    if x_new.ndim == 1:
        x_new = x_new[:, None]
    if x_new.shape[1] != beta.shape[0]:
        raise ValueError(f"x_new has {x_new.shape[1]} columns, model expects {beta.shape[0]}")
    eta = float(b0) + x_new @ beta
    if family == "binomial":
        return eta, 1.0 / (1.0 + np.exp(-eta))
    return eta


def predict(fit: ElnetFit, x_new, lambda_index=None, lambda_value=None):
    """Predict at one path point (see ``predict_at``)."""
    idx = resolve_lambda_index(fit.lambdas, lambda_index, lambda_value)
    b0, beta = fit.coef_path()
    return predict_at(b0[idx], beta[:, idx], x_new, fit.family)
