"""
tensor_nn/matrix.py
Validation helpers for the 2-D float64 arrays every module passes around.
"""

import numpy as np

from utils.errors import InputError, ShapeError

# Row-major 2-D float64 ndarray. Kept as an alias: numpy already is the matrix type.
Matrix = np.ndarray


def as_matrix(values, name: str = "input", allow_nonfinite: bool = False) -> Matrix:
    """Coerce to a 2-D float64 array; 1-D input becomes a single column."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if not allow_nonfinite and not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains NaN or Inf entries")
    return arr


def as_vector(values, name: str = "input") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains NaN or Inf entries")
    return arr


def check_rows(*named_arrays) -> int:
    """All arrays share the same row count; returns it."""
    counts = {name: len(arr) for name, arr in named_arrays}
    if len(set(counts.values())) > 1:
        raise ShapeError(f"row counts are not aligned: {counts}")
    return next(iter(counts.values()))
