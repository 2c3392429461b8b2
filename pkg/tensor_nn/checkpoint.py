"""
tensor_nn/checkpoint.py
Versioned JSON documents for DenseNet parameters.

Document layout (format_version 1)::

    {"format_version": 1, "dropout_rate": 0.1, "seed": 7,
     "layers": [{"fan_in": 3, "fan_out": 64, "activation": "relu",
                 "weight": [...row-major...], "bias": [...]}, ...]}

Python's float repr is the shortest round-tripping form, so parameters reload bit-exactly.
"""

import numpy as np

from tensor_nn.dense_net import DenseNet, Layer
from utils.errors import InputError

FORMAT_VERSION = 1


def save_network(net: DenseNet) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "dropout_rate": net.dropout_rate,
        "seed": net.seed,
        "layers": [
            {
                "fan_in": layer.fan_in,
                "fan_out": layer.fan_out,
                "activation": layer.activation,
                "weight": layer.weight.ravel().tolist(),
                "bias": layer.bias.tolist(),
            }
            for layer in net.layers
        ],
    }


def load_network(doc: dict) -> DenseNet:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise InputError(f"unsupported network format_version {version!r}")
    try:
        layers = [
            Layer(
                weight=np.asarray(entry["weight"], dtype=np.float64).reshape(entry["fan_in"], entry["fan_out"]),
                bias=np.asarray(entry["bias"], dtype=np.float64),
                activation=entry["activation"],
            )
            for entry in doc["layers"]
        ]
    except (KeyError, ValueError) as e:
        raise InputError(f"malformed network document: {e}") from e
    seed = int(doc.get("seed", 0))
    return DenseNet(
        layers=layers,
        dropout_rate=float(doc.get("dropout_rate", 0.0)),
        seed=seed,
        rng=np.random.default_rng([seed, 1]),
    )
