"""
preprocess/config.py
Hyper-parameters of the constrained min-max trainer.
"""

from dataclasses import asdict, dataclass, fields
from typing import Optional, Tuple, Union

import numpy as np

from config.app_config import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_DROPOUT,
    DEFAULT_EPOCHS,
    DEFAULT_HIDDEN_WIDTH,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MULTIPLIER_RATE,
    DEFAULT_TEMPERATURE,
)
from utils.errors import ParameterError

FAIRNESS_NOTIONS = ("independence", "separation")
PENALTY_TARGETS = ("prediction", "data")
LOSS_KINDS = ("cross_entropy", "squared_error")


@dataclass(frozen=True)
class PreprocessorConfig:
    """Budgets, penalty weight and optimisation settings.

    ``delta_x`` is either one budget shared by every covariate variable or one
    budget per covariate variable in schema order.
    """

    delta_x: Union[float, Tuple[float, ...]] = 0.1
    delta_y: float = 0.0
    lambda_f: float = 1.0
    fairness_notion: str = "independence"
    penalty_target: str = "prediction"
    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    t_prime: int = 1
    lr_h: float = DEFAULT_LEARNING_RATE
    lr_v: float = DEFAULT_LEARNING_RATE
    lr_g: float = DEFAULT_LEARNING_RATE
    rate_x: float = DEFAULT_MULTIPLIER_RATE
    rate_y: float = DEFAULT_MULTIPLIER_RATE
    loss: Optional[str] = None
    hidden_width: int = DEFAULT_HIDDEN_WIDTH
    depth: int = 2
    dropout_rate: float = DEFAULT_DROPOUT
    temperature: float = DEFAULT_TEMPERATURE
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.delta_x, (int, float)):
            object.__setattr__(self, "delta_x", tuple(float(v) for v in self.delta_x))
        budgets = np.atleast_1d(np.asarray(self.delta_x, dtype=np.float64))
        if budgets.size == 0 or np.any(budgets < 0):
            raise ParameterError(f"delta_x: budgets must be >= 0, got {self.delta_x}")
        for name in ("delta_y", "lambda_f", "lr_h", "lr_v", "lr_g", "rate_x", "rate_y"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name}: must be >= 0, got {getattr(self, name)}")
        for name in ("epochs", "batch_size", "t_prime", "hidden_width", "depth"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name}: must be >= 1, got {getattr(self, name)}")
        if self.fairness_notion not in FAIRNESS_NOTIONS:
            raise ParameterError(f"fairness_notion: expected one of {FAIRNESS_NOTIONS}, got '{self.fairness_notion}'")
        if self.penalty_target not in PENALTY_TARGETS:
            raise ParameterError(f"penalty_target: expected one of {PENALTY_TARGETS}, got '{self.penalty_target}'")
        if self.loss is not None and self.loss not in LOSS_KINDS:
            raise ParameterError(f"loss: expected one of {LOSS_KINDS}, got '{self.loss}'")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ParameterError(f"dropout_rate: must lie in [0, 1), got {self.dropout_rate}")
        if self.temperature <= 0:
            raise ParameterError(f"temperature: must be > 0, got {self.temperature}")

    def budgets(self, n_variables: int) -> np.ndarray:
        """Per-variable delta_x for ``n_variables`` covariate columns."""
        budgets = np.atleast_1d(np.asarray(self.delta_x, dtype=np.float64))
        if budgets.size == 1:
            return np.full(n_variables, float(budgets[0]))
        if budgets.size != n_variables:
            raise ParameterError(f"delta_x: {budgets.size} budgets for {n_variables} covariate variables")
        return budgets.copy()

    def loss_for(self, task: str) -> str:
        if self.loss is not None:
            return self.loss
        return "cross_entropy" if task == "classification" else "squared_error"

    @property
    def transforms_outcome(self) -> bool:
        return self.delta_y > 0

    def to_dict(self) -> dict:
        doc = asdict(self)
        if isinstance(self.delta_x, tuple):
            doc["delta_x"] = list(self.delta_x)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "PreprocessorConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ParameterError(f"unknown preprocessor setting(s): {', '.join(unknown)}")
        return cls(**doc)

    def replace(self, **changes) -> "PreprocessorConfig":
        doc = self.to_dict()
        doc.update(changes)
        return PreprocessorConfig.from_dict(doc)

