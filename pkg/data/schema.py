"""
data/schema.py
Column schema: roles, kinds, one-hot layout and frozen standardization stats.

Schema files are JSON documents::

    {"name": "adult",
     "columns": [
        {"name": "age", "role": "covariate", "kind": "continuous"},
        {"name": "sex", "role": "sensitive", "kind": "categorical", "categories": ["Female", "Male"]},
        {"name": "income", "role": "outcome", "kind": "categorical", "categories": ["<=50K", ">50K"]}]}

``mean``/``std`` may be present on continuous columns; they are filled in from the
training split otherwise. ``categories`` fixes the one-hot column order.
"""

import json
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

from utils.errors import InputError

ROLES = ("covariate", "sensitive", "outcome")
KINDS = ("continuous", "categorical")


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    role: str
    kind: str
    categories: Tuple[str, ...] = ()
    mean: Optional[float] = None
    std: Optional[float] = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise InputError(f"column '{self.name}': role must be one of {ROLES}, got '{self.role}'")
        if self.kind not in KINDS:
            raise InputError(f"column '{self.name}': kind must be one of {KINDS}, got '{self.kind}'")
        if self.kind == "categorical" and len(self.categories) < 2:
            raise InputError(f"column '{self.name}': categorical columns need at least 2 categories")

    @property
    def width(self) -> int:
        return len(self.categories) if self.kind == "categorical" else 1

    def to_dict(self) -> dict:
        doc = {"name": self.name, "role": self.role, "kind": self.kind}
        if self.kind == "categorical":
            doc["categories"] = list(self.categories)
        if self.mean is not None:
            doc["mean"] = self.mean
            doc["std"] = self.std
        return doc


@dataclass(frozen=True)
class ColumnBlock:
    """Position of one variable inside an encoded matrix."""

    name: str
    kind: str
    start: int
    stop: int

    @property
    def width(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True)
class Schema:
    columns: Tuple[ColumnSpec, ...]
    name: str = "dataset"

    def __post_init__(self):
        outcomes = [c for c in self.columns if c.role == "outcome"]
        if len(outcomes) != 1:
            raise InputError(f"schema needs exactly one outcome column, found {len(outcomes)}")
        if not any(c.role == "covariate" for c in self.columns):
            raise InputError("schema needs at least one covariate column")
        if not any(c.role == "sensitive" for c in self.columns):
            raise InputError("schema needs at least one sensitive column")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise InputError("schema column names must be unique")
        if outcomes[0].kind == "categorical" and len(outcomes[0].categories) != 2:
            raise InputError("a categorical outcome must be binary")

    # ------------------------------------------------------------------
    @classmethod
    def from_dict(cls, doc: dict) -> "Schema":
        try:
            columns = tuple(
                ColumnSpec(
                    name=str(c["name"]),
                    role=c["role"],
                    kind=c["kind"],
                    categories=tuple(str(v) for v in c.get("categories", ())),
                    mean=c.get("mean"),
                    std=c.get("std"),
                )
                for c in doc["columns"]
            )
        except KeyError as e:
            raise InputError(f"schema column is missing key {e}") from e
        return cls(columns=columns, name=doc.get("name", "dataset"))

    @classmethod
    def load(cls, path: str) -> "Schema":
        try:
            with open(path, "r", encoding="utf-8") as f:
                return cls.from_dict(json.load(f))
        except FileNotFoundError as e:
            raise InputError(f"schema file not found: '{path}'") from e
        except json.JSONDecodeError as e:
            raise InputError(f"schema '{path}' is not valid JSON: {e}") from e

    def to_dict(self) -> dict:
        return {"name": self.name, "columns": [c.to_dict() for c in self.columns]}

    def with_stats(self, stats: dict) -> "Schema":
        """Copy with (mean, std) set for the named continuous columns."""
        columns = tuple(
            replace(c, mean=stats[c.name][0], std=stats[c.name][1]) if c.name in stats else c
            for c in self.columns
        )
        return Schema(columns=columns, name=self.name)

    # ------------------------------------------------------------------
    def by_role(self, role: str) -> List[ColumnSpec]:
        return [c for c in self.columns if c.role == role]

    @property
    def outcome(self) -> ColumnSpec:
        return self.by_role("outcome")[0]

    @property
    def task(self) -> str:
        return "classification" if self.outcome.kind == "categorical" else "regression"

    def blocks(self, role: str) -> List[ColumnBlock]:
        blocks, start = [], 0
        for c in self.by_role(role):
            blocks.append(ColumnBlock(c.name, c.kind, start, start + c.width))
            start += c.width
        return blocks

    @property
    def covariate_blocks(self) -> List[ColumnBlock]:
        return self.blocks("covariate")

    @property
    def x_width(self) -> int:
        return sum(c.width for c in self.by_role("covariate"))

    @property
    def a_width(self) -> int:
        return sum(c.width for c in self.by_role("sensitive"))
