"""
data/dataset.py
Encoded, row-aligned (X, A, Y) datasets and their CSV round trip.
"""

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from data.schema import Schema
from tensor_nn.matrix import check_rows
from utils.errors import DataLoadError, InputError, ParameterError
from utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class Dataset:
    """X holds standardized continuous columns and one-hot blocks; Y is 0/1 or real."""

    schema: Schema
    x: np.ndarray
    a: np.ndarray
    y: np.ndarray
    split: str = "full"
    index: np.ndarray = field(default=None)

    def __post_init__(self):
        check_rows(("x", self.x), ("a", self.a), ("y", self.y))
        if self.x.shape[1] != self.schema.x_width:
            raise InputError(f"x has {self.x.shape[1]} columns, schema expects {self.schema.x_width}")
        if self.a.shape[1] != self.schema.a_width:
            raise InputError(f"a has {self.a.shape[1]} columns, schema expects {self.schema.a_width}")
        if self.index is None:
            object.__setattr__(self, "index", np.arange(len(self.y)))

    def __len__(self) -> int:
        return len(self.y)

    @property
    def task(self) -> str:
        return self.schema.task

    @property
    def groups(self) -> np.ndarray:
        """Integer sensitive-group ids (one per distinct row of A)."""
        _, codes = np.unique(self.a, axis=0, return_inverse=True)
        return codes.ravel()

    def subset(self, rows, split: Optional[str] = None) -> "Dataset":
        rows = np.asarray(rows)
        return replace(
            self, x=self.x[rows], a=self.a[rows], y=self.y[rows],
            index=self.index[rows], split=split or self.split,
        )

    def with_transformed(self, x: np.ndarray, y: Optional[np.ndarray] = None) -> "Dataset":
        """The transformed dataset D~ = (X~, A, Y~)."""
        return replace(self, x=np.asarray(x, dtype=np.float64), y=self.y if y is None else np.asarray(y))


# ----------------------------------------------------------------------
# Encoding
# ----------------------------------------------------------------------
def _fit_stats(frame: pd.DataFrame, schema: Schema) -> dict:
    stats = {}
    for c in schema.columns:
        if c.kind == "continuous" and c.role != "outcome":
            values = frame[c.name].to_numpy(dtype=np.float64)
            std = float(values.std())
            stats[c.name] = (float(values.mean()), std if std > 0 else 1.0)
    return stats


def _parse_continuous(raw: pd.Series, name: str) -> np.ndarray:
    values = pd.to_numeric(raw, errors="coerce")
    bad = np.flatnonzero(values.isna().to_numpy() | ~np.isfinite(values.to_numpy(dtype=np.float64)))
    if len(bad):
        row = int(bad[0])
        raise DataLoadError(f"unparseable numeric cell {raw.iloc[row]!r}", row=row + 1, column=name)
    return values.to_numpy(dtype=np.float64)


def _encode_role(frame: pd.DataFrame, schema: Schema, role: str) -> np.ndarray:
    parts = []
    for c in schema.by_role(role):
        if c.kind == "continuous":
            values = frame[c.name].to_numpy(dtype=np.float64)
            if c.mean is not None:
                values = (values - c.mean) / c.std
            parts.append(values.reshape(-1, 1))
        else:
            codes = frame[c.name].to_numpy()
            one_hot = np.zeros((len(frame), len(c.categories)))
            one_hot[np.arange(len(frame)), codes] = 1.0
            parts.append(one_hot)
    return np.hstack(parts) if parts else np.zeros((len(frame), 0))


def encode_frame(frame: pd.DataFrame, schema: Schema, fit: bool = True) -> Tuple[Schema, np.ndarray, np.ndarray, np.ndarray]:
    """Typed frame (continuous floats, categorical codes) -> (schema with stats, X, A, Y)."""
    if fit:
        schema = schema.with_stats(_fit_stats(frame, schema))
    x = _encode_role(frame, schema, "covariate")
    a = _encode_role(frame, schema, "sensitive")
    y = frame[schema.outcome.name].to_numpy(dtype=np.float64)
    return schema, x, a, y


def _typed_frame(raw: pd.DataFrame, schema: Schema) -> pd.DataFrame:
    typed = {}
    for c in schema.columns:
        if c.kind == "continuous":
            typed[c.name] = _parse_continuous(raw[c.name], c.name)
        else:
            lookup = {cat: i for i, cat in enumerate(c.categories)}
            cells = raw[c.name].astype(str).str.strip()
            codes = cells.map(lookup)
            missing = np.flatnonzero(codes.isna().to_numpy())
            if len(missing):
                row = int(missing[0])
                raise DataLoadError(f"unseen category {cells.iloc[row]!r}", row=row + 1, column=c.name)
            typed[c.name] = codes.to_numpy(dtype=np.int64)
    return pd.DataFrame(typed)


def load_csv(path: str, schema_path: str, fitted_schema: Optional[Schema] = None) -> Dataset:
    """Read a header-row CSV against a JSON schema.

    Continuous stats are fitted on this file unless ``fitted_schema`` (a training
    split's schema) is given, in which case its frozen stats are reused.
    """
    schema = fitted_schema if fitted_schema is not None else Schema.load(schema_path)
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (OSError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DataLoadError(f"cannot read '{path}': {e}") from e
    for c in schema.columns:
        if c.name not in raw.columns:
            raise DataLoadError("missing column in header", column=c.name)
    typed = _typed_frame(raw, schema)
    schema, x, a, y = encode_frame(typed, schema, fit=fitted_schema is None)
    logger.info(f"Loaded {len(y)} rows from {path} ({schema.x_width} covariate columns)")
    return Dataset(schema=schema, x=x, a=a, y=y, split="train" if fitted_schema is None else "test")


def _decode_role(matrix: np.ndarray, schema: Schema, role: str) -> dict:
    columns = {}
    for c, block in zip(schema.by_role(role), schema.blocks(role)):
        values = matrix[:, block.start:block.stop]
        if c.kind == "continuous":
            columns[c.name] = values[:, 0] if c.mean is None else values[:, 0] * c.std + c.mean
        else:
            columns[c.name] = np.asarray(c.categories, dtype=object)[np.argmax(values, axis=1)]
    return columns


def write_csv(dataset: Dataset, path: str) -> None:
    """Inverse of load_csv: de-standardize continuous columns and decode one-hot blocks."""
    schema = dataset.schema
    columns = {}
    columns.update(_decode_role(dataset.x, schema, "covariate"))
    columns.update(_decode_role(dataset.a, schema, "sensitive"))
    outcome = schema.outcome
    if outcome.kind == "categorical":
        columns[outcome.name] = np.asarray(outcome.categories, dtype=object)[dataset.y.astype(int)]
    else:
        columns[outcome.name] = dataset.y
    frame = pd.DataFrame({c.name: columns[c.name] for c in schema.columns})
    frame.to_csv(path, index=False, encoding="utf-8")


# ----------------------------------------------------------------------
# Splitting
# ----------------------------------------------------------------------
def _restandardize(dataset: Dataset, train_rows: np.ndarray) -> Dataset:
    """Refit continuous stats on ``train_rows`` and re-encode every row with them."""
    schema = dataset.schema
    x, a = dataset.x.copy(), dataset.a.copy()
    stats = {}
    for role, matrix in (("covariate", x), ("sensitive", a)):
        for c, block in zip(schema.by_role(role), schema.blocks(role)):
            if c.kind != "continuous" or c.mean is None:
                continue
            raw = matrix[:, block.start] * c.std + c.mean
            mean, std = float(raw[train_rows].mean()), float(raw[train_rows].std())
            std = std if std > 0 else 1.0
            matrix[:, block.start] = (raw - mean) / std
            stats[c.name] = (mean, std)
    return replace(dataset, schema=schema.with_stats(stats), x=x, a=a)


def split(dataset: Dataset, fraction: float, seed: int, restandardize: bool = True) -> Tuple[Dataset, Dataset]:
    """Random (train, test) partition; ``fraction`` is the share held out for testing."""
    if not 0.0 < fraction < 1.0:
        raise ParameterError(f"split fraction must lie in (0, 1), got {fraction}")
    n = len(dataset)
    perm = np.random.default_rng(seed).permutation(n)
    n_test = int(round(fraction * n))
    test_rows, train_rows = np.sort(perm[:n_test]), np.sort(perm[n_test:])
    if restandardize:
        dataset = _restandardize(dataset, train_rows)
    return dataset.subset(train_rows, "train"), dataset.subset(test_rows, "test")
