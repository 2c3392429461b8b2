"""
tensor_nn/adam.py
Adam with bias correction. The default beta1 = 0 turns the first moment into the raw gradient.
"""

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from utils.errors import ParameterError, ShapeError


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.0
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: List[np.ndarray] = field(default_factory=list)
    second_moment: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ParameterError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ParameterError("beta1 and beta2 must lie in [0, 1)")

    def initialise(self, params: Sequence[np.ndarray]) -> None:
        self.first_moment = [np.zeros_like(p) for p in params]
        self.second_moment = [np.zeros_like(p) for p in params]
        self.step = 0


def adam_step(state: AdamState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Update ``params`` in place and return them."""
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} parameters but {len(grads)} gradients")
    if not state.first_moment:
        state.initialise(params)
    for p, g, m in zip(params, grads, state.first_moment):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"parameter {p.shape}, gradient {g.shape} and moment {m.shape} differ")

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.step
    correction2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
    return list(params)


class AdamOptimizer:
    """Binds an AdamState to a fixed parameter list (one per network)."""

    def __init__(self, params: Sequence[np.ndarray], learning_rate=1e-3, beta1=0.0, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.state = AdamState(learning_rate=learning_rate, beta1=beta1, beta2=beta2, eps=eps)
        self.state.initialise(self.params)

    def step(self, grads: Sequence[np.ndarray], ascend: bool = False) -> None:
        if ascend:
            grads = [-g for g in grads]
        adam_step(self.state, self.params, grads)
