"""
tensor_nn/gumbel.py
Gumbel-Softmax sampling for one-hot output blocks.
"""

import numpy as np
from scipy.special import softmax

from tensor_nn.matrix import Matrix, as_matrix
from utils.errors import ParameterError, StateError

EPS = 1e-20


class GumbelSoftmaxHead:
    """Relaxed categorical sample of a logit block.

    With ``hard`` the forward value is the one-hot of the perturbed argmax while the
    gradient is taken through the relaxed sample (straight-through estimator).
    """

    def __init__(self, temperature: float = 0.5):
        if temperature <= 0:
            raise ParameterError(f"temperature must be > 0, got {temperature}")
        self.temperature = float(temperature)
        self._soft = None

    def forward(self, logits: Matrix, rng: np.random.Generator, hard: bool = False) -> Matrix:
        logits = as_matrix(logits, "logits")
        uniform = rng.random(logits.shape)
        noise = -np.log(-np.log(uniform + EPS) + EPS)
        soft = softmax((logits + noise) / self.temperature, axis=1)
        self._soft = soft
        if not hard:
            return soft
        one_hot = np.zeros_like(soft)
        one_hot[np.arange(len(soft)), np.argmax(soft, axis=1)] = 1.0
        return one_hot

    def backward(self, grad: Matrix) -> Matrix:
        """dLoss/dlogits given dLoss/dsample."""
        if self._soft is None:
            raise StateError("backward() needs a preceding forward()")
        s = self._soft
        return s * (grad - np.sum(grad * s, axis=1, keepdims=True)) / self.temperature


def gumbel_softmax_head(logits: Matrix, temperature: float, hard: bool, rng: np.random.Generator) -> Matrix:
    return GumbelSoftmaxHead(temperature).forward(logits, rng, hard=hard)
