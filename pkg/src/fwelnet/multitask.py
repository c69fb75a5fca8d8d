"""Two-response learning by alternating fwelnet fits.

Each response is refit with fwelnet using the absolute coefficients of the
other response (plus a constant column) as its feature information.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cv import CvResult, FoldAssignment, cv_elnet, cv_fwelnet, make_folds
from .data import Dataset
from .solver import SolverConfig


@dataclass(frozen=True)
class MultitaskResult:
    beta1: np.ndarray
    beta2: np.ndarray
    intercept1: float
    intercept2: float
    # snapshots[k] = (beta1^(k), beta2^(k)); index 0 is the elastic-net start
    snapshots: list = field(default_factory=list)
    cv1: Optional[CvResult] = None
    cv2: Optional[CvResult] = None
    thetas1: list = field(default_factory=list)
    thetas2: list = field(default_factory=list)
    start_intercepts: tuple = (0.0, 0.0)

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        return self.intercept1 + x @ self.beta1, self.intercept2 + x @ self.beta2


def side_information(beta) -> np.ndarray:
    """[|beta|, 1] as a p x 2 feature-information matrix."""
    beta = np.asarray(beta, dtype=float)
    return np.column_stack([np.abs(beta), np.ones(beta.size)])


def _at_min(model, cv: CvResult):
    b0, beta = model.coef_path()
    return float(b0[cv.index_min]), beta[:, cv.index_min].copy()


def multitask_fit(
    x,
    y1,
    y2,
    n_outer: int = 3,
    alpha: float = 1.0,
    nfolds: int = 10,
    seed: int = 0,
    n_iter: int = 1,
    mode: str = "mean",
    n_lambda: int = 100,
    config: Optional[SolverConfig] = None,
    folds: Optional[FoldAssignment] = None,
) -> MultitaskResult:
    """Alternate fwelnet fits between two Gaussian responses sharing ``x``.

    Both responses start at their CV-selected (lambda_min) elastic-net
    solutions. Each outer round refits response 2 with side information
    from the current response-1 coefficients, then response 1 from the
    fresh response-2 coefficients. All CV calls share one fold assignment
    (``folds``, or one drawn from ``nfolds`` and ``seed``).
    """
    d1, d2 = Dataset(x, y1), Dataset(x, y2)
    folds = folds or make_folds(d1.n, nfolds, None, seed)
    kw = dict(alpha=alpha, folds=folds, n_lambda=n_lambda, config=config)

    m1, cv1 = cv_elnet(d1, **kw)
    m2, cv2 = cv_elnet(d2, **kw)
    a1, b1 = _at_min(m1, cv1)
    a2, b2 = _at_min(m2, cv2)
    start = (a1, a2)
    snapshots = [(b1.copy(), b2.copy())]
    thetas1, thetas2 = [], []
    for _ in range(n_outer):
        m2, cv2 = cv_fwelnet(d2, side_information(b1), n_iter=n_iter, mode=mode, **kw)
        a2, b2 = _at_min(m2, cv2)
        thetas2.append(m2.theta.copy())
        m1, cv1 = cv_fwelnet(d1, side_information(b2), n_iter=n_iter, mode=mode, **kw)
        a1, b1 = _at_min(m1, cv1)
        thetas1.append(m1.theta.copy())
        snapshots.append((b1.copy(), b2.copy()))
    return MultitaskResult(b1, b2, a1, a2, snapshots, cv1, cv2, thetas1, thetas2, start)
