"""
metrics/report.py
Per-model fairness reports and their aggregation across runs.
"""

from dataclasses import asdict, dataclass, fields
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from hgr.exact import hgr_binned
from metrics.fairness import auc, choose_threshold, eo_ratio, ks_eo, ks_sp, sp_ratio
from tensor_nn import as_vector, check_rows
from utils.errors import InputError, MetricError
from utils.logger import get_logger

logger = get_logger(__name__)

PROB_CLIP = 1e-7
REPORT_FIELDS = ("auc", "sp", "eo", "ks_sp", "ks_eo", "hgr_hat", "loss", "threshold", "mean_gap")


@dataclass(frozen=True)
class FairnessReport:
    """Regression reports leave auc, sp, eo, ks_eo and threshold empty."""

    auc: Optional[float]
    sp: Optional[float]
    eo: Optional[float]
    ks_sp: float
    ks_eo: Optional[float]
    hgr_hat: float
    loss: float
    threshold: Optional[float]
    mean_gap: float = 0.0
    task: str = "classification"
    undefined: Tuple[str, ...] = ()  # ratios left empty because a rate they divide by is 0

    def __post_init__(self):
        object.__setattr__(self, "undefined", tuple(self.undefined))
        if self.auc is not None and not 0.0 <= self.auc <= 1.0:
            raise MetricError(f"auc outside [0, 1]: {self.auc}")
        for name in ("sp", "eo", "ks_sp", "ks_eo"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise MetricError(f"{name} must be >= 0, got {value}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "FairnessReport":
        known = {f.name for f in fields(cls)}
        missing = [name for name in REPORT_FIELDS if name not in doc and name != "mean_gap"]
        if missing:
            raise InputError(f"report is missing field(s): {', '.join(missing)}")
        return cls(**{k: v for k, v in doc.items() if k in known})


def _group_mean_gap(scores: np.ndarray, groups: np.ndarray) -> float:
    means = [scores[groups == g].mean() for g in np.unique(groups)]
    return float(max(means) - min(means))


def prediction_loss(scores, labels, task: str) -> float:
    """Clipped cross-entropy for classification scores, squared error otherwise."""
    s = as_vector(scores, "scores")
    y = as_vector(labels, "labels")
    if task == "classification":
        p = np.clip(s, PROB_CLIP, 1.0 - PROB_CLIP)
        return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
    return float(np.mean((s - y) ** 2))


def _ratio_or_none(name: str, compute: Callable[[], float], undefined: List[str]) -> Optional[float]:
    """The ratio, or None (recorded in ``undefined``) when a rate it divides by is 0."""
    try:
        return compute()
    except MetricError as exc:
        logger.warning(f"{name} left empty: {exc}")
        undefined.append(name)
        return None


def evaluate_scores(
    scores,
    labels,
    groups,
    task: str = "classification",
    threshold: Optional[float] = None,
    hgr_bins: int = 10,
) -> FairnessReport:
    """All report fields for one model's scores on one evaluation split."""
    s = as_vector(scores, "scores")
    y = as_vector(labels, "labels")
    groups = np.asarray(groups).ravel()
    check_rows(("scores", s), ("labels", y), ("groups", groups))
    loss = prediction_loss(s, y, task)
    rho = hgr_binned(s, groups, hgr_bins)
    gap = _group_mean_gap(s, groups)
    if task != "classification":
        return FairnessReport(
            auc=None, sp=None, eo=None, ks_sp=ks_sp(s, groups), ks_eo=None,
            hgr_hat=rho, loss=loss, threshold=None, mean_gap=gap, task=task,
        )
    t = choose_threshold(s, y) if threshold is None else float(threshold)
    pred = (s >= t).astype(np.float64)
    undefined: List[str] = []
    return FairnessReport(
        auc=auc(s, y),
        sp=_ratio_or_none("sp", lambda: sp_ratio(pred, groups), undefined),
        eo=_ratio_or_none("eo", lambda: eo_ratio(pred, groups, y), undefined),
        ks_sp=ks_sp(s, groups),
        ks_eo=ks_eo(s, groups, y),
        hgr_hat=rho,
        loss=loss,
        threshold=t,
        mean_gap=gap,
        task=task,
        undefined=tuple(undefined),
    )


def aggregate_reports(reports: Sequence[FairnessReport]) -> Dict[str, dict]:
    """mean and 2 * standard error (ddof=1) of every numeric field across runs."""
    if not reports:
        raise MetricError("nothing to aggregate")
    summary = {}
    for name in REPORT_FIELDS:
        values = [getattr(r, name) for r in reports if getattr(r, name) is not None]
        if not values:
            summary[name] = {"mean": None, "two_se": None, "n": 0}
            continue
        arr = np.asarray(values, dtype=np.float64)
        two_se = 2.0 * arr.std(ddof=1) / np.sqrt(arr.size) if arr.size > 1 else 0.0
        summary[name] = {"mean": float(arr.mean()), "two_se": float(two_se), "n": int(arr.size)}
    return summary
