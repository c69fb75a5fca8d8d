"""Data containers, standardization and lambda sequences.

All solvers work on a centered (and by default rescaled) copy of the design
matrix; coefficients are mapped back to the original scale afterwards.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

FAMILIES = ("gaussian", "binomial")

# alpha used in the lambda_max denominator when alpha == 0 (pure ridge)
ALPHA_FLOOR = 0.001


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


@dataclass(frozen=True)
class Dataset:
    """Response, design matrix and optional observation group ids."""

    x: np.ndarray
    y: np.ndarray
    obs_group_ids: Optional[np.ndarray] = None
    family: str = "gaussian"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise DataError(f"x must be 2-dimensional, got shape {x.shape}")
        n, p = x.shape
        if n < 2 or p < 1:
            raise DataError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if y.shape[0] != n:
            raise DataError(f"x has {n} rows but y has {y.shape[0]} entries")
        if not np.all(np.isfinite(x)):
            raise DataError("x contains non-finite entries")
        if not np.all(np.isfinite(y)):
            raise DataError("y contains non-finite entries")
        if self.family not in FAMILIES:
            raise DataError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "binomial" and not np.all((y == 0) | (y == 1)):
            raise DataError("binomial family requires y in {0, 1}")
        groups = self.obs_group_ids
        if groups is not None:
            groups = np.asarray(groups).ravel()
            if groups.shape[0] != n:
                raise DataError(
                    f"x has {n} rows but obs_group_ids has {groups.shape[0]} entries"
                )
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "obs_group_ids", groups)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def subset(self, rows: np.ndarray) -> "Dataset":
        groups = None if self.obs_group_ids is None else self.obs_group_ids[rows]
        return Dataset(self.x[rows], self.y[rows], groups, self.family)


@dataclass(frozen=True)
class StandardizationInfo:
    """Maps between original and standardized coordinates.

    The standardized column j is ``(x_j - col_means[j]) / col_scales[j]``.
    Columns with zero variance get scale 1 and are marked in ``constant``.
    """

    col_means: np.ndarray
    col_scales: np.ndarray
    y_mean: float
    constant: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @classmethod
    def identity(cls, p: int) -> "StandardizationInfo":
        return cls(np.zeros(p), np.ones(p), 0.0, np.zeros(p, dtype=bool))


@dataclass(frozen=True)
class LambdaSequence:
    values: np.ndarray
    min_ratio: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size == 0:
            raise ValueError("lambda sequence is empty")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("lambda values must be finite and nonnegative")
        if values.size > 1 and np.any(np.diff(values) >= 0):
            raise ValueError("lambda values must be strictly decreasing")
        object.__setattr__(self, "values", values)

    @property
    def n_lambda(self) -> int:
        return self.values.size

    @property
    def lambda_max(self) -> float:
        return float(self.values[0])

    def __len__(self) -> int:
        return self.values.size


def standardize(dataset: Dataset, scale: bool = True) -> tuple[Dataset, StandardizationInfo]:
    """Center the columns of x (and y, for the Gaussian family).

    With ``scale=True`` each column is also rescaled so that its squared
    norm equals n. Constant columns are left at zero after centering and
    flagged in the returned info; solvers pin their coefficients to 0.
    """
    x, y = dataset.x, dataset.y
    n = dataset.n
    means = x.mean(axis=0)
    xc = x - means
    norms = np.sqrt((xc**2).sum(axis=0) / n)
    # relative test so that a constant column polluted by rounding is still caught
    constant = norms <= 1e-12 * np.maximum(1.0, np.abs(means))
    if np.any(constant):
        warnings.warn(
            f"{int(constant.sum())} constant column(s) excluded from the fit: "
            f"{np.flatnonzero(constant).tolist()}",
            stacklevel=2,
        )
        xc[:, constant] = 0.0
    if scale:
        scales = np.where(constant, 1.0, norms)
        xs = xc / scales
    else:
        scales = np.ones(dataset.p)
        xs = xc
    if dataset.family == "gaussian":
        y_mean = float(y.mean())
        ys = y - y_mean
    else:
        y_mean = 0.0
        ys = y
    info = StandardizationInfo(means, scales, y_mean, constant)
    return Dataset(xs, ys, dataset.obs_group_ids, dataset.family), info


def destandardize(
    beta_std: np.ndarray, intercept_std: float, info: StandardizationInfo
) -> tuple[np.ndarray, float]:
    """Map a standardized-scale fit back to original-scale coefficients.

    Works column-wise on a (p, m) matrix of coefficients with a length-m
    intercept vector as well as on a single coefficient vector.
    """
    beta_std = np.asarray(beta_std, dtype=float)
    if beta_std.shape[0] != info.col_scales.shape[0]:
        raise ValueError(
            f"coefficient length {beta_std.shape[0]} does not match "
            f"{info.col_scales.shape[0]} standardized columns"
        )
    scales = info.col_scales if beta_std.ndim == 1 else info.col_scales[:, None]
    beta = beta_std / scales
    intercept = np.asarray(intercept_std) + info.y_mean - info.col_means @ beta
    if np.ndim(intercept) == 0:
        intercept = float(intercept)
    return beta, intercept


def default_min_ratio(n: int, p: int) -> float:
    return 0.01 if n < p else 1e-4


def lambda_max(x_std: np.ndarray, y_work: np.ndarray, weights: np.ndarray, alpha: float,
               exclude: Optional[np.ndarray] = None) -> float:
    """Smallest lambda at which every penalized coefficient is zero."""
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0):
        raise ValueError("penalty factors must be nonnegative")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    grad = np.abs(x_std.T @ y_work)
    keep = weights > 0
    if exclude is not None:
        keep &= ~exclude
    if not np.any(keep):
        return 0.0
    return float(np.max(grad[keep] / (max(alpha, ALPHA_FLOOR) * weights[keep])))


def make_lambda_sequence(
    x_std: np.ndarray,
    y_work: np.ndarray,
    weights: np.ndarray,
    alpha: float,
    n_lambda: int = 100,
    min_ratio: Optional[float] = None,
    exclude: Optional[np.ndarray] = None,
) -> LambdaSequence:
    """Log-spaced lambda sequence from lambda_max down to min_ratio * lambda_max.

    Objective scaling is half the residual sum of squares with no 1/n
    factor, so lambda values grow with n.
    """
    n, p = x_std.shape
    if min_ratio is None:
        min_ratio = default_min_ratio(n, p)
    if not 0.0 < min_ratio < 1.0:
        raise ValueError(f"min_ratio must lie in (0, 1), got {min_ratio}")
    if n_lambda < 1:
        raise ValueError("n_lambda must be at least 1")
    lmax = lambda_max(x_std, y_work, weights, alpha, exclude)
    if lmax <= 0.0:
        warnings.warn("lambda_max is 0 (response orthogonal to every column)", stacklevel=2)
        return LambdaSequence(np.array([0.0]), min_ratio)
    if n_lambda == 1:
        return LambdaSequence(np.array([lmax]), min_ratio)
    values = lmax * np.exp(np.linspace(0.0, np.log(min_ratio), n_lambda))
    values[0] = lmax
    return LambdaSequence(values, min_ratio)


def read_matrix(path: str, header: bool = False) -> tuple[np.ndarray, Optional[list[str]]]:
    """Read a numeric CSV file.

    Raises DataError naming the line and column of the first bad cell.
    """
    rows: list[list[float]] = []
    names = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        width = None
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                names = [c.strip() for c in row]
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataError(
                    f"{path}: line {lineno} has {len(row)} columns, expected {width}"
                )
            vals = []
            for col, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: line {lineno}, column {col}: cannot parse {cell!r} as a number"
                    ) from None
                if not np.isfinite(v):
                    raise DataError(f"{path}: line {lineno}, column {col}: non-finite value {cell!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows, dtype=float), names


def read_vector(path: str, header: bool = False) -> np.ndarray:
    mat, _ = read_matrix(path, header)
    if mat.shape[1] != 1:
        raise DataError(f"{path}: expected a single column, found {mat.shape[1]}")
    return mat[:, 0]


def read_labels(path: str, header: bool = False) -> np.ndarray:
    """Read one label per line (group ids may be non-numeric)."""
    labels: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if header and lineno == 1:
                continue
            if not row:
                continue
            if len(row) != 1:
                raise DataError(f"{path}: line {lineno} has {len(row)} columns, expected 1")
            labels.append(row[0].strip())
    return np.array(labels)


def as_index_array(values: Sequence) -> np.ndarray:
    """Integer codes for arbitrary (hashable) group labels, in order of first appearance."""
    _, first, codes = np.unique(np.asarray(values), return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[codes]
