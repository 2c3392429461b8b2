"""
metrics/tradeoff.py
Pareto fronts, the 2-D hypervolume indicator and consistency scores.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from utils.errors import InputError, MetricError


@dataclass(frozen=True)
class TradeoffPoint:
    one_minus_auc: float
    scaled_fairness: float
    tag: Tuple = ()

    def __post_init__(self):
        for name in ("one_minus_auc", "scaled_fairness"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InputError(f"{name} must lie in [0, 1], got {value}")

    @property
    def coords(self) -> Tuple[float, float]:
        return self.one_minus_auc, self.scaled_fairness


def _coords(point) -> Tuple[float, float]:
    if isinstance(point, TradeoffPoint):
        return point.coords
    x, y = point
    return float(x), float(y)


def pareto_front(points: Sequence) -> List:
    """Non-dominated points when both coordinates are minimised."""
    coords = [_coords(p) for p in points]
    front = []
    for i, (x, y) in enumerate(coords):
        dominated = any(
            (ox <= x and oy <= y) and (ox < x or oy < y) for j, (ox, oy) in enumerate(coords) if j != i
        )
        if not dominated:
            front.append(points[i])
    return front


def hypervolume_2d(points: Sequence, reference: Tuple[float, float] = (1.0, 1.0)) -> float:
    """Area dominated by the front and bounded by ``reference`` (sorted sweep)."""
    rx, ry = reference
    for p in points:
        x, y = _coords(p)
        if x > rx or y > ry:
            raise InputError(f"point ({x}, {y}) exceeds the reference point {reference}")
    front = sorted({_coords(p) for p in pareto_front(list(points))})
    area = 0.0
    for i, (x, y) in enumerate(front):
        next_x = front[i + 1][0] if i + 1 < len(front) else rx
        area += (next_x - x) * (ry - y)
    return float(area)


def scale_fairness(values) -> Tuple[np.ndarray, float]:
    """Divide by the largest value in the comparison set and clamp to [0, 1].

    Returns the scaled values and the cap used, so it can be recorded next to them.
    """
    arr = np.asarray(values, dtype=np.float64).ravel()
    if np.any(arr < 0):
        raise InputError("fairness values must be >= 0")
    cap = float(arr.max()) if arr.size else 0.0
    if cap <= 0.0:
        return np.zeros_like(arr), cap
    return np.clip(arr / cap, 0.0, 1.0), cap


def consistency_scores(per_model_values) -> float:
    """Sample standard deviation (divisor k - 1) across downstream models."""
    arr = np.asarray(per_model_values, dtype=np.float64).ravel()
    if arr.size < 2:
        raise MetricError("consistency needs values from at least 2 models")
    return float(np.std(arr, ddof=1))


def risk_spread(per_model_values) -> dict:
    """Range of the values and Popoviciu's bound range^2 / 4 on their (population) variance."""
    arr = np.asarray(per_model_values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise MetricError("risk spread needs at least one value")
    spread = float(arr.max() - arr.min())
    return {"range": spread, "variance": float(np.var(arr)), "popoviciu_bound": spread ** 2 / 4.0}
