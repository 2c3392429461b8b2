"""
preprocess/upstream.py
The upstream model h (covariates only) and its supervised loss, plus the two
reference fits used for diagnostics: h trained on the original data, and the
joint-risk model trained on (X, A).
"""

from typing import Optional, Tuple

import numpy as np

from preprocess.config import PreprocessorConfig
from tensor_nn import AdamOptimizer, DenseNet, as_matrix, as_vector, check_rows, load_network, save_network
from utils.errors import InputError, TrainingDivergedError
from utils.logger import get_logger

logger = get_logger(__name__)

PROB_CLIP = 1e-7


class UpstreamModel:
    """h: X -> Y. Classification nets end in a two-class softmax, regression nets in one linear unit."""

    def __init__(self, net: DenseNet, task: str, loss: str):
        self.net = net
        self.task = task
        self.loss = loss

    @classmethod
    def build(cls, input_width: int, task: str, config: PreprocessorConfig, seed: int) -> "UpstreamModel":
        classification = task == "classification"
        net = DenseNet.build(
            input_width,
            [config.hidden_width] * config.depth,
            2 if classification else 1,
            "softmax" if classification else "identity",
            dropout_rate=config.dropout_rate,
            seed=seed,
        )
        return cls(net, task, config.loss_for(task))

    @property
    def classification(self) -> bool:
        return self.task == "classification"

    # ------------------------------------------------------------------
    def signal(self, outputs: np.ndarray) -> np.ndarray:
        """Score column fed to the critic: P(Y=1) or the regression output."""
        return outputs[:, 1:2] if self.classification else outputs[:, 0:1]

    def predict(self, x) -> np.ndarray:
        return self.signal(self.net.forward(x))[:, 0]

    def loss_gradients(self, outputs: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
        """Mean loss, dLoss/dOutputs and dLoss/dTarget for a (possibly soft) target."""
        n = len(target)
        prediction = self.signal(outputs)[:, 0]
        target = np.asarray(target, dtype=np.float64).ravel()
        d_out = np.zeros_like(outputs)
        if self.loss == "cross_entropy":
            probs = outputs if self.classification else np.column_stack([1.0 - prediction, prediction])
            clipped = np.clip(probs, PROB_CLIP, 1.0 - PROB_CLIP)
            inside = (probs > PROB_CLIP) & (probs < 1.0 - PROB_CLIP)
            weights = np.column_stack([1.0 - target, target])
            loss = float(-np.mean(np.sum(weights * np.log(clipped), axis=1)))
            d_probs = np.where(inside, -weights / clipped / n, 0.0)
            if self.classification:
                d_out = d_probs
            else:
                d_out[:, 0] = d_probs[:, 1] - d_probs[:, 0]
            d_target = -(np.log(clipped[:, 1]) - np.log(clipped[:, 0])) / n
        else:
            residual = prediction - target
            loss = float(np.mean(residual ** 2))
            column = 1 if self.classification else 0
            d_out[:, column] = 2.0 * residual / n
            d_target = -2.0 * residual / n
        return loss, d_out, d_target

    def risk(self, x, y) -> float:
        """Mean loss on (x, y) in inference mode."""
        outputs = self.net.forward(x)
        loss, _, _ = self.loss_gradients(outputs, as_vector(y, "outcome"))
        return loss

    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        return {"task": self.task, "loss": self.loss, "net": save_network(self.net)}

    @classmethod
    def from_dict(cls, doc: dict) -> "UpstreamModel":
        try:
            return cls(load_network(doc["net"]), doc["task"], doc["loss"])
        except KeyError as e:
            raise InputError(f"malformed upstream document: missing {e}") from e


def fit_supervised(
    inputs,
    y,
    task: str,
    config: PreprocessorConfig,
    seed: Optional[int] = None,
    label: str = "supervised",
) -> UpstreamModel:
    """Plain mini-batch Adam fit of an upstream-shaped network."""
    inputs = as_matrix(inputs, "inputs")
    y = as_vector(y, "outcome")
    n = check_rows(("inputs", inputs), ("outcome", y))
    if n == 0:
        raise InputError(f"{label} fit needs at least one row")
    seed = config.seed if seed is None else seed
    model = UpstreamModel.build(inputs.shape[1], task, config, seed)
    optimizer = AdamOptimizer(model.net.parameters(), learning_rate=config.lr_h)
    rng = np.random.default_rng([seed, 3])
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            outputs = model.net.forward(inputs[idx], training=True)
            loss, d_out, _ = model.loss_gradients(outputs, y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"{label} loss became NaN", {"epoch": epoch, "loss": loss})
            optimizer.step(model.net.backward(d_out).params)
    logger.debug(f"{label} fit finished: risk {model.risk(inputs, y):.4f}")
    return model


def fit_plain_upstream(dataset, config: PreprocessorConfig) -> UpstreamModel:
    """h* trained directly on (X, Y)."""
    return fit_supervised(dataset.x, dataset.y, dataset.task, config, label="plain upstream")


def fit_joint_risk_model(dataset, config: PreprocessorConfig) -> UpstreamModel:
    """Unconstrained (X, A) -> Y model; its risk estimates the minimal joint risk."""
    return fit_supervised(
        np.hstack([dataset.x, dataset.a]), dataset.y, dataset.task, config, seed=config.seed + 7, label="joint risk"
    )
