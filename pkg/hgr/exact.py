"""
hgr/exact.py
Exact maximal-correlation quantities for discrete joint distributions, plus the
binned plug-in estimator built on them.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import svdvals

from utils.errors import InputError, ParameterError

SUM_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class DiscreteJoint:
    """k1 x k2 table of joint probabilities with strictly positive marginals."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 2:
            raise InputError(f"joint table must be 2-D, got shape {p.shape}")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise InputError("joint probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > SUM_TOLERANCE:
            raise InputError(f"joint probabilities sum to {p.sum():.15f}, not 1")
        if np.any(p.sum(axis=1) <= 0) or np.any(p.sum(axis=0) <= 0):
            raise InputError("joint table has an empty category (zero marginal)")
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_counts(cls, counts) -> "DiscreteJoint":
        counts = np.asarray(counts, dtype=np.float64)
        return cls(counts / counts.sum())

    @property
    def row_marginal(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    @property
    def col_marginal(self) -> np.ndarray:
        return self.probs.sum(axis=0)

    @property
    def product(self) -> np.ndarray:
        return np.outer(self.row_marginal, self.col_marginal)


def hgr_exact_discrete(joint: DiscreteJoint) -> float:
    """Second singular value of P_ij / sqrt(p_i q_j)."""
    q = joint.probs / np.sqrt(joint.product)
    sigma = svdvals(q)
    if len(sigma) < 2:
        return 0.0
    return float(np.clip(sigma[1], 0.0, 1.0))


def chi2_divergence_exact(joint: DiscreteJoint) -> float:
    """chi^2(P_joint || P_row x P_col) = sum P^2 / (p q) - 1."""
    return float(np.sum(joint.probs ** 2 / joint.product) - 1.0)


def f_star(v):
    """Convex conjugate of the chi^2 generator: f*(x) = x^2/4 + x."""
    return v * v / 4.0 + v


def dual_value_exact(joint: DiscreteJoint, critic_table) -> float:
    """E_joint[V] - E_product[f*(V)] for a critic tabulated on the k1 x k2 cells."""
    v = np.asarray(critic_table, dtype=np.float64)
    if v.shape != joint.probs.shape:
        raise InputError(f"critic table shape {v.shape} does not match joint {joint.probs.shape}")
    return float(np.sum(joint.probs * v) - np.sum(joint.product * f_star(v)))


def hgr_exact_conditional(joints_by_stratum: Sequence[DiscreteJoint]) -> float:
    """Conditional HGR for a discrete conditioning variable: sup over strata."""
    if len(joints_by_stratum) == 0:
        raise InputError("need at least one stratum")
    return max(hgr_exact_discrete(j) for j in joints_by_stratum)


def d_metric(rho: float) -> float:
    """sqrt(2 - 2 rho), the distance-like companion of the HGR correlation."""
    if not 0.0 <= rho <= 1.0:
        raise ParameterError(f"rho must lie in [0, 1], got {rho}")
    return float(np.sqrt(2.0 - 2.0 * rho))


# ----------------------------------------------------------------------
# Plug-in estimation on samples
# ----------------------------------------------------------------------
def discretize(values, bins: int = 10) -> np.ndarray:
    """Integer codes: rows of a matrix become group ids, continuous columns quantile bins."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[1] > 1:
        _, codes = np.unique(arr, axis=0, return_inverse=True)
        return codes.ravel()
    arr = arr.ravel()
    uniques, codes = np.unique(arr, return_inverse=True)
    if len(uniques) <= bins:
        return codes
    edges = np.unique(np.quantile(arr, np.linspace(0.0, 1.0, bins + 1)[1:-1]))
    _, codes = np.unique(np.searchsorted(edges, arr, side="right"), return_inverse=True)
    return codes


def contingency(codes1: np.ndarray, codes2: np.ndarray) -> DiscreteJoint:
    counts = np.zeros((codes1.max() + 1, codes2.max() + 1))
    np.add.at(counts, (codes1, codes2), 1.0)
    return DiscreteJoint.from_counts(counts)


def hgr_binned(s1, s2, bins: int = 10) -> float:
    """Exact HGR of the empirical contingency table of the (binned) samples."""
    c1, c2 = discretize(s1, bins), discretize(s2, bins)
    if len(c1) != len(c2):
        raise InputError("samples are not row-aligned")
    if c1.max() == 0 or c2.max() == 0:
        return 0.0
    return hgr_exact_discrete(contingency(c1, c2))
