"""
data/synthetic.py
Synthetic generators used by the toy experiments and the test-suite.

toy_regression
    A ~ Bernoulli(0.5), X | A ~ Normal(A, 1), eps ~ Normal(0, 0.1^2),
    Y = (2A - 1) sin(X) + 2 A X + eps.

toy_classification (synthetic companion for the classification path)
    A ~ Bernoulli(0.5)
    X1 | A ~ Normal(A, 1),  X2 ~ Normal(0, 1)
    X3 | A ~ Categorical(p_A) over {c0, c1, c2}, p_0 = (0.5, 0.3, 0.2), p_1 = (0.2, 0.3, 0.5)
    logit = 2 X1 + X2 + 0.5 [X3 = c2] - 1.2,   Y ~ Bernoulli(sigmoid(logit))
    hard=True scales the logit by 0.4 and flips 15% of the labels, which leaves a weak,
    noisy task for the auxiliary-label comparison.

Continuous columns are emitted on their raw scale (no standardization stats).
"""

from typing import Tuple

import numpy as np
from scipy.special import expit

from data.dataset import Dataset
from data.schema import ColumnSpec, Schema
from utils.errors import ParameterError

TOY_TRAIN_SIZE = 4500
TOY_TEST_SIZE = 760
MIN_ROWS = 10


def _binary_one_hot(a: np.ndarray) -> np.ndarray:
    return np.stack([1.0 - a, a], axis=1)


def _check_size(n: int) -> None:
    if n < MIN_ROWS:
        raise ParameterError(f"generators need n >= {MIN_ROWS}, got {n}")


def toy_regression_schema() -> Schema:
    return Schema(
        name="toy_regression",
        columns=(
            ColumnSpec("x", "covariate", "continuous"),
            ColumnSpec("a", "sensitive", "categorical", ("0", "1")),
            ColumnSpec("y", "outcome", "continuous"),
        ),
    )


def toy_regression(n: int = TOY_TRAIN_SIZE, seed: int = 0) -> Dataset:
    _check_size(n)
    rng = np.random.default_rng(seed)
    a = rng.binomial(1, 0.5, size=n).astype(np.float64)
    x = rng.normal(loc=a, scale=1.0)
    eps = rng.normal(0.0, 0.1, size=n)
    y = (2.0 * a - 1.0) * np.sin(x) + 2.0 * a * x + eps
    return Dataset(schema=toy_regression_schema(), x=x.reshape(-1, 1), a=_binary_one_hot(a), y=y)


def toy_regression_mean(x: np.ndarray, a: np.ndarray) -> np.ndarray:
    """E[Y | X, A] of the toy regression generator."""
    return (2.0 * a - 1.0) * np.sin(x) + 2.0 * a * x


def toy_regression_split(seed: int = 0) -> Tuple[Dataset, Dataset]:
    """4,500 training and 760 test rows drawn from one stream."""
    full = toy_regression(TOY_TRAIN_SIZE + TOY_TEST_SIZE, seed)
    rows = np.arange(len(full))
    return full.subset(rows[:TOY_TRAIN_SIZE], "train"), full.subset(rows[TOY_TRAIN_SIZE:], "test")


def toy_classification_schema() -> Schema:
    return Schema(
        name="toy_classification",
        columns=(
            ColumnSpec("x1", "covariate", "continuous"),
            ColumnSpec("x2", "covariate", "continuous"),
            ColumnSpec("x3", "covariate", "categorical", ("c0", "c1", "c2")),
            ColumnSpec("a", "sensitive", "categorical", ("0", "1")),
            ColumnSpec("y", "outcome", "categorical", ("0", "1")),
        ),
    )


def toy_classification(n: int = 5000, seed: int = 0, hard: bool = False) -> Dataset:
    _check_size(n)
    rng = np.random.default_rng(seed)
    a = rng.binomial(1, 0.5, size=n).astype(np.float64)
    x1 = rng.normal(loc=a, scale=1.0)
    x2 = rng.normal(size=n)
    probs = np.where(a[:, None] == 1.0, [0.2, 0.3, 0.5], [0.5, 0.3, 0.2])
    x3 = (rng.random(n)[:, None] > np.cumsum(probs, axis=1)).sum(axis=1)
    logit = 2.0 * x1 + x2 + 0.5 * (x3 == 2) - 1.2
    if hard:
        logit = 0.4 * logit
    y = rng.binomial(1, expit(logit)).astype(np.float64)
    if hard:
        flip = rng.random(n) < 0.15
        y = np.where(flip, 1.0 - y, y)
    x3_one_hot = np.eye(3)[x3]
    x = np.column_stack([x1, x2, x3_one_hot])
    return Dataset(schema=toy_classification_schema(), x=x, a=_binary_one_hot(a), y=y)
