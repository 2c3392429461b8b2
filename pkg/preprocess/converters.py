"""
preprocess/converters.py
The converters G_X (X, A) -> X_bar and G_Y (X, A, Y) -> Y_bar.

G_X is a shared trunk followed by one head per covariate variable.  Heads are
residual: continuous blocks emit x + head(z), one-hot blocks emit a Gumbel-softmax
sample of kappa * onehot(x) + head(z), so a freshly initialised converter is close
to the identity map.  G_X never sees the outcome column.
"""

from typing import List, Optional, Sequence

import numpy as np

from data.schema import ColumnBlock
from tensor_nn import DenseNet, GumbelSoftmaxHead, as_matrix, load_network, save_network
from utils.errors import InputError

# Logit margin of the original category inside a one-hot head.
ONE_HOT_LOGIT_SCALE = 5.0
HEAD_INIT_SCALE = 0.01


class _VariableHead:
    def __init__(self, block: ColumnBlock, net: DenseNet, temperature: float):
        self.block = block
        self.net = net
        self.gumbel = GumbelSoftmaxHead(temperature) if block.kind == "categorical" else None

    def forward(self, features, original, training, rng, hard):
        out = self.net.forward(features, training=training)
        if self.gumbel is None:
            return original + out
        return self.gumbel.forward(ONE_HOT_LOGIT_SCALE * original + out, rng, hard=hard)

    def backward(self, grad):
        if self.gumbel is not None:
            grad = self.gumbel.backward(grad)
        return self.net.backward(grad)


class _BlockConverter:
    """Trunk plus per-block heads over a fixed input layout."""

    def __init__(self, trunk: DenseNet, blocks: Sequence[ColumnBlock], heads: Sequence[DenseNet], temperature: float):
        self.trunk = trunk
        self.blocks = list(blocks)
        self.temperature = float(temperature)
        self.heads = [_VariableHead(b, h, temperature) for b, h in zip(blocks, heads)]

    @staticmethod
    def _build_parts(input_width, blocks, width, depth, dropout_rate, seed):
        trunk = DenseNet.build(
            input_width, [width] * (depth - 1), width, "relu", dropout_rate=dropout_rate, seed=seed
        )
        heads = [
            DenseNet.build(width, [], b.width, "identity", seed=seed + 1 + i, output_scale=HEAD_INIT_SCALE)
            for i, b in enumerate(blocks)
        ]
        return trunk, heads

    def parameters(self) -> List[np.ndarray]:
        params = list(self.trunk.parameters())
        for head in self.heads:
            params.extend(head.net.parameters())
        return params

    def _forward(self, inputs, original, training, rng, hard):
        features = self.trunk.forward(inputs, training=training)
        return np.hstack(
            [head.forward(features, original[:, head.block.start:head.block.stop], training, rng, hard)
             for head in self.heads]
        )

    def backward(self, grad) -> List[np.ndarray]:
        """Parameter gradients, in ``parameters()`` order, of a loss with dLoss/dOutput ``grad``."""
        grad = as_matrix(grad, "converter gradient")
        head_params, d_features = [], None
        for head in self.heads:
            g = head.backward(grad[:, head.block.start:head.block.stop])
            head_params.extend(g.params)
            d_features = g.input if d_features is None else d_features + g.input
        trunk_grads = self.trunk.backward(d_features)
        return list(trunk_grads.params) + head_params

    def to_dict(self) -> dict:
        return {
            "temperature": self.temperature,
            "blocks": [{"name": b.name, "kind": b.kind, "start": b.start, "stop": b.stop} for b in self.blocks],
            "trunk": save_network(self.trunk),
            "heads": [save_network(h.net) for h in self.heads],
        }

    @staticmethod
    def _parts_from_dict(doc: dict):
        try:
            blocks = [ColumnBlock(b["name"], b["kind"], int(b["start"]), int(b["stop"])) for b in doc["blocks"]]
            return load_network(doc["trunk"]), blocks, [load_network(h) for h in doc["heads"]], doc["temperature"]
        except KeyError as e:
            raise InputError(f"malformed converter document: missing {e}") from e


class CovariateConverter(_BlockConverter):
    """G_X: (X, A) -> X_bar."""

    @classmethod
    def build(cls, blocks, sensitive_width, width, depth, dropout_rate, temperature, seed) -> "CovariateConverter":
        x_width = blocks[-1].stop
        trunk, heads = cls._build_parts(x_width + sensitive_width, blocks, width, depth, dropout_rate, seed)
        return cls(trunk, blocks, heads, temperature)

    @property
    def x_width(self) -> int:
        return self.blocks[-1].stop

    def forward(self, x, a, training=False, rng: Optional[np.random.Generator] = None, hard=False) -> np.ndarray:
        x = as_matrix(x, "covariates")
        a = as_matrix(a, "sensitive")
        if x.shape[1] != self.x_width:
            raise InputError(f"covariates have {x.shape[1]} columns, converter expects {self.x_width}")
        return self._forward(np.hstack([x, a]), x, training, rng, hard)

    @classmethod
    def from_dict(cls, doc: dict) -> "CovariateConverter":
        return cls(*cls._parts_from_dict(doc))


class OutcomeConverter(_BlockConverter):
    """G_Y: (X, A, Y) -> Y_bar; binary labels travel as a two-column one-hot block."""

    @classmethod
    def build(cls, outcome_kind, input_width, width, depth, dropout_rate, temperature, seed) -> "OutcomeConverter":
        block = ColumnBlock("outcome", outcome_kind, 0, 2 if outcome_kind == "categorical" else 1)
        trunk, heads = cls._build_parts(input_width + block.width, [block], width, depth, dropout_rate, seed)
        return cls(trunk, [block], heads, temperature)

    @property
    def categorical(self) -> bool:
        return self.blocks[0].kind == "categorical"

    def forward(self, x, a, y_block, training=False, rng: Optional[np.random.Generator] = None, hard=False) -> np.ndarray:
        y_block = as_matrix(y_block, "outcome")
        inputs = np.hstack([as_matrix(x, "covariates"), as_matrix(a, "sensitive"), y_block])
        return self._forward(inputs, y_block, training, rng, hard)

    @classmethod
    def from_dict(cls, doc: dict) -> "OutcomeConverter":
        return cls(*cls._parts_from_dict(doc))
