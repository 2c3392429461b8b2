"""
tensor_nn/dense_net.py
Dense feed-forward networks with cached forward passes and reverse-mode gradients.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import expit, softmax

from tensor_nn.matrix import Matrix, as_matrix
from utils.errors import ParameterError, ShapeError, StateError

ACTIVATIONS = ("relu", "identity", "softmax", "sigmoid")


@dataclass(eq=False)
class Layer:
    weight: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray  # (fan_out,)
    activation: str = "relu"

    @property
    def fan_in(self) -> int:
        return self.weight.shape[0]

    @property
    def fan_out(self) -> int:
        return self.weight.shape[1]


@dataclass
class NetGradients:
    """Gradients in ``DenseNet.parameters()`` order plus the gradient w.r.t. the input."""

    params: List[np.ndarray]
    input: np.ndarray


@dataclass
class _LayerCache:
    inputs: np.ndarray
    outputs: np.ndarray
    mask: Optional[np.ndarray] = None


def _activate(z: np.ndarray, tag: str) -> np.ndarray:
    if tag == "relu":
        return np.maximum(z, 0.0)
    if tag == "identity":
        return z
    if tag == "softmax":
        return softmax(z, axis=1)
    if tag == "sigmoid":
        return expit(z)
    raise ParameterError(f"unknown activation '{tag}'")


def _activation_backward(grad: np.ndarray, out: np.ndarray, tag: str) -> np.ndarray:
    if tag == "relu":
        return grad * (out > 0.0)
    if tag == "identity":
        return grad
    if tag == "softmax":
        return out * (grad - np.sum(grad * out, axis=1, keepdims=True))
    if tag == "sigmoid":
        return grad * out * (1.0 - out)
    raise ParameterError(f"unknown activation '{tag}'")


@dataclass(eq=False)
class DenseNet:
    """A stack of dense layers; dropout follows every hidden activation in training mode."""

    layers: List[Layer]
    dropout_rate: float = 0.0
    seed: int = 0
    rng: np.random.Generator = field(default=None, repr=False)
    _cache: Optional[List[_LayerCache]] = field(default=None, repr=False)

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("a network needs at least one layer")
        for i in range(len(self.layers) - 1):
            if self.layers[i].fan_out != self.layers[i + 1].fan_in:
                raise ShapeError(
                    f"layer {i} outputs {self.layers[i].fan_out} columns "
                    f"but layer {i + 1} expects {self.layers[i + 1].fan_in}"
                )
        for layer in self.layers:
            if layer.activation not in ACTIVATIONS:
                raise ParameterError(f"unknown activation '{layer.activation}'")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ParameterError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.rng is None:
            self.rng = np.random.default_rng(self.seed)

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------
    @classmethod
    def build(
        cls,
        input_width: int,
        hidden_widths: Sequence[int],
        output_width: int,
        output_activation: str = "identity",
        dropout_rate: float = 0.0,
        seed: int = 0,
        output_scale: float = 1.0,
    ) -> "DenseNet":
        """He-uniform initialisation; ``output_scale`` shrinks the last layer."""
        rng = np.random.default_rng(seed)
        widths = [int(input_width), *[int(w) for w in hidden_widths], int(output_width)]
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            limit = np.sqrt(6.0 / fan_in)
            weight = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            last = i == len(widths) - 2
            if last:
                weight *= output_scale
            layers.append(
                Layer(weight=weight, bias=np.zeros(fan_out), activation=output_activation if last else "relu")
            )
        # The dropout stream is derived from, but not identical to, the init stream.
        return cls(layers=layers, dropout_rate=dropout_rate, seed=seed, rng=np.random.default_rng([seed, 1]))

    @property
    def input_width(self) -> int:
        return self.layers[0].fan_in

    @property
    def output_width(self) -> int:
        return self.layers[-1].fan_out

    def parameters(self) -> List[np.ndarray]:
        params = []
        for layer in self.layers:
            params.extend([layer.weight, layer.bias])
        return params

    # ------------------------------------------------------------------
    # Passes
    # ------------------------------------------------------------------
    def forward(self, inputs: Matrix, training: bool = False) -> Matrix:
        x = as_matrix(inputs, "network input")
        if x.shape[1] != self.input_width:
            raise ShapeError(f"network expects {self.input_width} input columns, got {x.shape[1]}")

        cache = [] if training else None
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            out = _activate(x @ layer.weight + layer.bias, layer.activation)
            mask = None
            if training and i < last and self.dropout_rate > 0.0:
                keep = 1.0 - self.dropout_rate
                mask = (self.rng.random(out.shape) < keep) / keep
                out = out * mask
            if training:
                cache.append(_LayerCache(inputs=x, outputs=out, mask=mask))
            x = out
        if training:
            self._cache = cache
        return x

    def backward(self, loss_grad: Matrix) -> NetGradients:
        """Gradients of a scalar loss given dLoss/dOutput of the last training forward."""
        if self._cache is None:
            raise StateError("backward() needs a preceding forward(training=True)")
        grad = np.asarray(loss_grad, dtype=np.float64)
        expected = self._cache[-1].outputs.shape
        if grad.shape != expected:
            raise ShapeError(f"loss gradient has shape {grad.shape}, expected {expected}")

        params: List[np.ndarray] = [None] * (2 * len(self.layers))
        for i in range(len(self.layers) - 1, -1, -1):
            layer, entry = self.layers[i], self._cache[i]
            post = entry.outputs
            if entry.mask is not None:
                grad = grad * entry.mask
                post = np.divide(post, entry.mask, out=np.zeros_like(post), where=entry.mask != 0)
            grad = _activation_backward(grad, post, layer.activation)
            params[2 * i] = entry.inputs.T @ grad
            params[2 * i + 1] = grad.sum(axis=0)
            grad = grad @ layer.weight.T
        return NetGradients(params=params, input=grad)


def forward(net: DenseNet, inputs: Matrix, training: bool = False) -> Matrix:
    return net.forward(inputs, training=training)


def backward(net: DenseNet, loss_grad: Matrix) -> NetGradients:
    return net.backward(loss_grad)
