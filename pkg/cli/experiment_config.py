"""
cli/experiment_config.py
The single JSON document that drives every command.

    {
      "dataset": {"source": "toy_classification", "n": 4000, "seed": 0, "test_fraction": 0.2},
      "preprocessor": {"delta_x": 0.1, "lambda_f": 1.0, "epochs": 50},
      "sweep": {"delta_x": [0.1], "delta_y": [0.0], "lambda_f": [0.5, 2.0, 8.0]},
      "downstream": ["logistic_regression", "knn", "small_mlp", "random_feature_linear"],
      "downstream_settings": {"knn_neighbors": 15},
      "runs": 2,
      "output_dir": "runs/toy"
    }

``--override section.key=value`` patches the document before validation; values
are parsed as JSON when possible (``--override sweep.lambda_f=[1,4]``).
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional, Sequence, Tuple

from config.app_config import OUTPUT_DIR
from downstream.models import MODEL_KINDS, DownstreamSettings
from preprocess.config import PreprocessorConfig
from utils.errors import InputError, ParameterError
from utils.path_utils import PathResolver

DATASET_SOURCES = ("toy_classification", "toy_classification_hard", "toy_regression", "csv")
SCHEMA_DIR = os.path.join("data", "schemas")


def _prefixed(section: str, build, doc: dict):
    try:
        return build(doc)
    except ParameterError as e:
        raise ParameterError(f"{section}.{e}") from e
    except TypeError as e:
        raise ParameterError(f"{section}: {e}") from e


@dataclass(frozen=True)
class DatasetSpec:
    source: str = "toy_classification"
    n: Optional[int] = None
    seed: int = 0
    path: Optional[str] = None
    schema: Optional[str] = None
    test_path: Optional[str] = None
    test_fraction: float = 0.2

    def __post_init__(self):
        if self.source not in DATASET_SOURCES:
            raise ParameterError(f"source: expected one of {DATASET_SOURCES}, got '{self.source}'")
        if self.source == "csv" and (not self.path or not self.schema):
            raise ParameterError("path: csv datasets need both 'path' and 'schema'")
        if self.n is not None and self.n < 10:
            raise ParameterError(f"n: must be >= 10, got {self.n}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ParameterError(f"test_fraction: must lie in (0, 1), got {self.test_fraction}")

    @property
    def schema_path(self) -> Optional[str]:
        """Shipped schemas may be referenced by name (``"adult"``)."""
        if self.schema is None:
            return None
        if os.path.sep in self.schema or self.schema.endswith(".json"):
            return self.schema
        return PathResolver.resource_path(os.path.join(SCHEMA_DIR, f"{self.schema}.json"))


@dataclass(frozen=True)
class SweepSpec:
    """Budget lists; budget i takes the i-th entry of each list, length-1 lists broadcast."""

    delta_x: Tuple = (0.1,)
    delta_y: Tuple[float, ...] = (0.0,)
    lambda_f: Tuple[float, ...] = (0.5, 2.0, 8.0)

    def __post_init__(self):
        for name in ("delta_x", "delta_y", "lambda_f"):
            values = tuple(getattr(self, name))
            if not values:
                raise ParameterError(f"{name}: sweep lists must be non-empty")
            object.__setattr__(self, name, values)
        for name in ("delta_y", "lambda_f"):
            if any(v < 0 for v in getattr(self, name)):
                raise ParameterError(f"{name}: sweep values must be >= 0")
        lengths = {len(self.delta_x), len(self.delta_y), len(self.lambda_f)} - {1}
        if len(lengths) > 1:
            raise ParameterError(f"delta_x: sweep lists have incompatible lengths {sorted(lengths)}")

    @property
    def size(self) -> int:
        return max(len(self.delta_x), len(self.delta_y), len(self.lambda_f))

    def budgets(self) -> List[dict]:
        def pick(values, i):
            value = values[0] if len(values) == 1 else values[i]
            return list(value) if isinstance(value, (list, tuple)) else value

        return [
            {
                "delta_x": pick(self.delta_x, i),
                "delta_y": pick(self.delta_y, i),
                "lambda_f": pick(self.lambda_f, i),
            }
            for i in range(self.size)
        ]


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    preprocessor: PreprocessorConfig = field(default_factory=PreprocessorConfig)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    downstream: Tuple[str, ...] = MODEL_KINDS
    downstream_settings: DownstreamSettings = field(default_factory=DownstreamSettings)
    runs: int = 1
    output_dir: str = OUTPUT_DIR
    method: str = "fair_prep"
    hgr_bins: int = 10
    diagnostics: bool = True
    slack: float = 0.15

    def __post_init__(self):
        object.__setattr__(self, "downstream", tuple(self.downstream))
        if not self.downstream:
            raise ParameterError("downstream: select at least one model")
        unknown = [k for k in self.downstream if k not in MODEL_KINDS]
        if unknown:
            raise ParameterError(f"downstream: unknown model(s) {unknown}, expected {MODEL_KINDS}")
        if self.runs < 1:
            raise ParameterError(f"runs: must be >= 1, got {self.runs}")
        if self.hgr_bins < 2:
            raise ParameterError(f"hgr_bins: must be >= 2, got {self.hgr_bins}")
        # Every sweep budget must form a valid preprocessor config.
        for budget in self.sweep.budgets():
            _prefixed("sweep", lambda b: self.preprocessor.replace(**b), budget)

    # ------------------------------------------------------------------
    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        doc.pop("code_version", None)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ParameterError(f"unknown config section(s): {', '.join(unknown)}")
        parts = {}
        if "dataset" in doc:
            parts["dataset"] = _prefixed("dataset", lambda d: DatasetSpec(**d), doc.pop("dataset"))
        if "preprocessor" in doc:
            parts["preprocessor"] = _prefixed("preprocessor", PreprocessorConfig.from_dict, doc.pop("preprocessor"))
        if "sweep" in doc:
            parts["sweep"] = _prefixed("sweep", lambda d: SweepSpec(**d), doc.pop("sweep"))
        if "downstream_settings" in doc:
            parts["downstream_settings"] = _prefixed(
                "downstream_settings", lambda d: DownstreamSettings(**d), doc.pop("downstream_settings")
            )
        parts.update(doc)
        return cls(**parts)

    @classmethod
    def load(cls, path: str, overrides: Sequence[str] = ()) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                doc = json.load(f)
        except FileNotFoundError as e:
            raise InputError(f"config file not found: '{path}'") from e
        except json.JSONDecodeError as e:
            raise InputError(f"config file '{path}' is not valid JSON: {e}") from e
        return cls.from_dict(apply_overrides(doc, overrides))

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["preprocessor"] = self.preprocessor.to_dict()
        doc["sweep"] = {k: list(v) for k, v in asdict(self.sweep).items()}
        doc["downstream"] = list(self.downstream)
        return doc

    def with_overrides(self, overrides: Sequence[str]) -> "ExperimentConfig":
        return ExperimentConfig.from_dict(apply_overrides(self.to_dict(), overrides))


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(doc: dict, overrides: Sequence[str]) -> dict:
    """Return a copy of ``doc`` with every ``dotted.key=value`` applied."""
    doc = json.loads(json.dumps(doc))
    for item in overrides or ():
        if "=" not in item:
            raise ParameterError(f"override '{item}' is not of the form key=value")
        key, raw = item.split("=", 1)
        path = [p for p in key.strip().split(".") if p]
        if not path:
            raise ParameterError(f"override '{item}' has an empty key")
        target = doc
        for part in path[:-1]:
            node = target.setdefault(part, {})
            if not isinstance(node, dict):
                raise ParameterError(f"override '{item}': '{part}' is not a section")
            target = node
        target[path[-1]] = _parse_value(raw)
    return doc
