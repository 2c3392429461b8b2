"""
metrics/fairness.py
Utility and group-fairness measures on scores and thresholded predictions.
"""

import numpy as np
from scipy.stats import rankdata

from tensor_nn import as_vector, check_rows
from utils.errors import MetricError


def group_labels(sensitive) -> np.ndarray:
    """Integer group id per row; every distinct row of the sensitive block is one group."""
    arr = np.asarray(sensitive)
    if arr.ndim == 2 and arr.shape[1] > 1:
        _, codes = np.unique(arr, axis=0, return_inverse=True)
    else:
        _, codes = np.unique(arr.ravel(), return_inverse=True)
    return codes.ravel()


def _binary_labels(labels, name="labels") -> np.ndarray:
    y = as_vector(labels, name)
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise MetricError(f"{name} must be 0/1")
    if len(np.unique(y)) < 2:
        raise MetricError(f"{name} contain a single class")
    return y


def auc(scores, labels) -> float:
    """Mann-Whitney AUC; tied scores get half credit."""
    s = as_vector(scores, "scores")
    y = _binary_labels(labels)
    check_rows(("scores", s), ("labels", y))
    ranks = rankdata(s)
    pos = y == 1.0
    n_pos, n_neg = pos.sum(), (~pos).sum()
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def choose_threshold(scores, labels) -> float:
    """Threshold t maximising TPR - FPR for the rule ``score >= t``; ties go to the larger t."""
    s = as_vector(scores, "scores")
    y = _binary_labels(labels)
    check_rows(("scores", s), ("labels", y))
    candidates = np.unique(s)
    pos, neg = np.sort(s[y == 1.0]), np.sort(s[y == 0.0])
    tpr = (len(pos) - np.searchsorted(pos, candidates, side="left")) / len(pos)
    fpr = (len(neg) - np.searchsorted(neg, candidates, side="left")) / len(neg)
    j = tpr - fpr
    best = np.flatnonzero(j == j.max())
    return float(candidates[best[-1]])


def sp_ratio(pred_labels, sensitive_groups) -> float:
    """sum_a |P(Y^=1 | A=a) / P(Y^=1) - 1|."""
    pred = as_vector(pred_labels, "predictions")
    groups = np.asarray(sensitive_groups).ravel()
    check_rows(("predictions", pred), ("groups", groups))
    overall = pred.mean() if len(pred) else 0.0
    if overall <= 0.0:
        raise MetricError("statistical parity ratio is undefined when P(Y^=1) = 0")
    return float(sum(abs(pred[groups == g].mean() / overall - 1.0) for g in np.unique(groups)))


def eo_ratio(pred_labels, sensitive_groups, true_labels) -> float:
    """sum_{y,a} |P(Y^=y | A=a, Y=y) / P(Y^=y | Y=y) - 1|."""
    pred = as_vector(pred_labels, "predictions")
    groups = np.asarray(sensitive_groups).ravel()
    y = as_vector(true_labels, "labels")
    check_rows(("predictions", pred), ("groups", groups), ("labels", y))
    total = 0.0
    for level in (0.0, 1.0):
        in_level = y == level
        if not in_level.any():
            raise MetricError(f"empty stratum: no rows with Y={int(level)}")
        pooled = np.mean(pred[in_level] == level)
        if pooled <= 0.0:
            raise MetricError(f"P(Y^={int(level)} | Y={int(level)}) = 0: ratio undefined")
        for g in np.unique(groups):
            stratum = in_level & (groups == g)
            if not stratum.any():
                raise MetricError(f"empty stratum (Y={int(level)}, group {g})")
            total += abs(np.mean(pred[stratum] == level) / pooled - 1.0)
    return float(total)


def ks_statistic(sample_a, sample_b) -> float:
    """Exact sup-distance between the two empirical CDFs."""
    a = np.sort(np.asarray(sample_a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(sample_b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise MetricError("KS statistic needs two non-empty samples")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def ks_sp(scores, sensitive_groups) -> float:
    """sum_a KS(scores | A=a, scores)."""
    s = as_vector(scores, "scores")
    groups = np.asarray(sensitive_groups).ravel()
    check_rows(("scores", s), ("groups", groups))
    return float(sum(ks_statistic(s[groups == g], s) for g in np.unique(groups)))


def ks_eo(scores, sensitive_groups, true_labels) -> float:
    """sum_{y,a} KS between y + (-1)^y * score on (A=a, Y=1-y) and on (Y=1-y)."""
    s = as_vector(scores, "scores")
    groups = np.asarray(sensitive_groups).ravel()
    y = as_vector(true_labels, "labels")
    check_rows(("scores", s), ("groups", groups), ("labels", y))
    total = 0.0
    for level in (0, 1):
        mapped = level + (-1) ** level * s
        pooled = y == 1 - level
        if not pooled.any():
            raise MetricError(f"empty stratum: no rows with Y={1 - level}")
        for g in np.unique(groups):
            stratum = pooled & (groups == g)
            if not stratum.any():
                raise MetricError(f"empty stratum (Y={1 - level}, group {g})")
            total += ks_statistic(mapped[stratum], mapped[pooled])
    return float(total)
