"""Grouped feature information and its link to group-lasso penalties.

With indicator side-information (one column per non-overlapping group),
minimizing the weighted penalty over theta for fixed beta gives a closed
form: writing the penalty as (lam/p) * sum_k P_k / v_k with
sum_k p_k v_k = 1 and P_k = alpha*||b_k||_1 + (1-alpha)/2*||b_k||_2^2,
Cauchy-Schwarz bounds it below by (lam/p) * (sum_k sqrt(p_k P_k))^2,
attained at v_k proportional to sqrt(P_k / p_k).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GroupStructure:
    group_of: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.group_of).ravel()
        if g.size == 0:
            raise ValueError("empty group structure")
        if not np.issubdtype(g.dtype, np.integer):
            raise ValueError("group labels must be integers 0..K-1")
        k = int(g.max()) + 1
        if g.min() < 0 or np.unique(g).size != k:
            raise ValueError("group labels must cover 0..K-1 with no gaps")
        object.__setattr__(self, "group_of", g)

    @classmethod
    def contiguous(cls, sizes) -> "GroupStructure":
        return cls(np.repeat(np.arange(len(sizes)), sizes))

    @property
    def n_groups(self) -> int:
        return int(self.group_of.max()) + 1

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.group_of, minlength=self.n_groups)

    @property
    def p(self) -> int:
        return self.group_of.size


def grouped_indicator_z(groups: GroupStructure) -> np.ndarray:
    """p x K matrix with z[j, k] = 1 when feature j is in group k."""
    z = np.zeros((groups.p, groups.n_groups))
    z[np.arange(groups.p), groups.group_of] = 1.0
    return z


def group_penalties(beta, groups: GroupStructure, alpha: float) -> np.ndarray:
    """alpha*||b_k||_1 + (1-alpha)/2*||b_k||_2^2 for each group k."""
    beta = np.asarray(beta, dtype=float)
    if beta.size != groups.p:
        raise ValueError(f"beta has {beta.size} entries, groups cover {groups.p}")
    l1 = np.bincount(groups.group_of, np.abs(beta), minlength=groups.n_groups)
    l2 = np.bincount(groups.group_of, beta**2, minlength=groups.n_groups)
    return alpha * l1 + 0.5 * (1.0 - alpha) * l2


def optimal_group_weights(beta, groups: GroupStructure, alpha: float) -> np.ndarray:
    """Group weights v minimizing sum_k P_k / v_k subject to sum_k p_k v_k = 1.

    Falls back to the uniform v_k = 1/p when beta is zero (the closed form
    is 0/0 there).
    """
    sizes = groups.sizes
    a = np.sqrt(group_penalties(beta, groups, alpha) / sizes)
    total = float(sizes @ a)
    if total == 0.0:
        return np.full(groups.n_groups, 1.0 / groups.p)
    return a / total


def weighted_group_penalty(beta, groups: GroupStructure, alpha: float, lam: float, v) -> float:
    """(lam/p) * sum_k P_k / v_k. Groups with P_k = 0 contribute 0 even when v_k = 0."""
    pk = group_penalties(beta, groups, alpha)
    v = np.asarray(v, dtype=float)
    terms = np.divide(pk, v, out=np.zeros_like(pk), where=pk > 0)
    return lam / groups.p * float(terms.sum())


def group_lasso_form(beta, groups: GroupStructure, alpha: float, lam: float) -> float:
    """(lam/p) * (sum_k sqrt(p_k P_k))^2."""
    pk = group_penalties(beta, groups, alpha)
    return lam / groups.p * float(np.sum(np.sqrt(groups.sizes * pk))) ** 2


def penalty_equivalence_check(beta, groups: GroupStructure, alpha: float, lam: float, v=None):
    """Compare the weighted penalty at ``v`` (default: optimal) with its lower bound.

    Returns (lhs, rhs, gap) with gap = lhs - rhs, which is zero at the
    optimal weights and nonnegative for any feasible v.
    """
    if v is None:
        v = optimal_group_weights(beta, groups, alpha)
    lhs = weighted_group_penalty(beta, groups, alpha, lam, v)
    rhs = group_lasso_form(beta, groups, alpha, lam)
    return lhs, rhs, lhs - rhs


def random_feasible_weights(groups: GroupStructure, rng: np.random.Generator) -> np.ndarray:
    """Positive v with sum_k p_k v_k = 1."""
    raw = rng.exponential(size=groups.n_groups)
    return raw / float(groups.sizes @ raw)


def weights_from_group_weights(v, groups: GroupStructure) -> np.ndarray:
    """Per-feature penalty factors w_j = 1 / (p * v_{group(j)})."""
    v = np.asarray(v, dtype=float)
    return 1.0 / (groups.p * v[groups.group_of])
