"""
preprocess/constraints.py
Distances between original and transformed columns: mean-absolute error for
continuous variables, categorical hinge for one-hot blocks.
"""

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from data.schema import ColumnBlock, Schema
from tensor_nn import as_matrix
from utils.errors import InputError

DISTANCE_KINDS = ("mae", "hinge")
_KIND_FOR_COLUMN = {"continuous": "mae", "categorical": "hinge"}


@dataclass(frozen=True)
class ConstraintSpec:
    """One distance kind per covariate variable, and one for the outcome."""

    x_blocks: Tuple[ColumnBlock, ...]
    x_kinds: Tuple[str, ...]
    y_kind: str

    @classmethod
    def for_schema(cls, schema: Schema) -> "ConstraintSpec":
        blocks = tuple(schema.covariate_blocks)
        return cls(
            x_blocks=blocks,
            x_kinds=tuple(_KIND_FOR_COLUMN[b.kind] for b in blocks),
            y_kind=_KIND_FOR_COLUMN[schema.outcome.kind],
        )

    @property
    def names(self) -> List[str]:
        return [b.name for b in self.x_blocks]

    def __len__(self) -> int:
        return len(self.x_blocks)


def _check_pair(kind: str, original, transformed) -> Tuple[np.ndarray, np.ndarray]:
    if kind not in DISTANCE_KINDS:
        raise InputError(f"unknown distance kind '{kind}'")
    original = as_matrix(original, "original")
    transformed = as_matrix(transformed, "transformed")
    if original.shape != transformed.shape:
        raise InputError(f"original {original.shape} and transformed {transformed.shape} shapes differ")
    if kind == "hinge":
        if original.shape[1] < 2:
            raise InputError("categorical hinge needs a one-hot block of width >= 2")
        if not np.allclose(original.sum(axis=1), 1.0) or not np.all(np.isin(original, (0.0, 1.0))):
            raise InputError("categorical hinge expects a one-hot original block")
    return original, transformed


def _hinge_terms(original: np.ndarray, transformed: np.ndarray):
    rows = np.arange(len(original))
    true_class = np.argmax(original, axis=1)
    others = transformed.copy()
    others[rows, true_class] = -np.inf
    rival = np.argmax(others, axis=1)
    margin = transformed[rows, true_class] - transformed[rows, rival]
    return np.maximum(0.0, 1.0 - margin), true_class, rival


def constraint_loss(kind: str, original, transformed) -> float:
    """MAE = mean |x - x~|; hinge = mean max(0, 1 - (s_true - s_max_other))."""
    original, transformed = _check_pair(kind, original, transformed)
    if len(original) == 0:
        return 0.0
    if kind == "mae":
        return float(np.mean(np.abs(transformed - original)))
    terms, _, _ = _hinge_terms(original, transformed)
    return float(terms.mean())


def constraint_loss_and_gradient(kind: str, original, transformed) -> Tuple[float, np.ndarray]:
    """The distance and its (sub)gradient w.r.t. ``transformed``."""
    original, transformed = _check_pair(kind, original, transformed)
    n = len(original)
    if kind == "mae":
        diff = transformed - original
        return float(np.mean(np.abs(diff))), np.sign(diff) / diff.size
    terms, true_class, rival = _hinge_terms(original, transformed)
    grad = np.zeros_like(transformed)
    active = np.flatnonzero(terms > 0.0)
    grad[active, true_class[active]] = -1.0 / n
    grad[active, rival[active]] += 1.0 / n
    return float(terms.mean()), grad


def covariate_distances(spec: ConstraintSpec, original, transformed) -> np.ndarray:
    """Per-variable Delta_X in schema order."""
    original = as_matrix(original, "original")
    transformed = as_matrix(transformed, "transformed")
    return np.array(
        [
            constraint_loss(kind, original[:, b.start:b.stop], transformed[:, b.start:b.stop])
            for b, kind in zip(spec.x_blocks, spec.x_kinds)
        ]
    )


def outcome_block(y: np.ndarray, kind: str) -> np.ndarray:
    """Outcome as the matrix the distance works on (one-hot for binary labels)."""
    y = np.asarray(y, dtype=np.float64).ravel()
    if kind == "hinge":
        return np.column_stack([1.0 - y, y])
    return y.reshape(-1, 1)


def named_distances(spec: ConstraintSpec, values) -> Dict[str, float]:
    return {name: float(v) for name, v in zip(spec.names, values)}
