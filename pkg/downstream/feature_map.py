"""
downstream/feature_map.py
Fixed feature maps f_e applied in front of a downstream model.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from tensor_nn import as_matrix
from utils.errors import InputError, ParameterError, ShapeError

FEATURE_MAP_KINDS = ("identity", "random_fourier")


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """identity, or random Fourier features sqrt(2/D) cos(x W + b) with W ~ N(0, 1/bandwidth^2)."""

    kind: str
    input_width: int
    output_width: int
    frequencies: Optional[np.ndarray] = None
    offsets: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in FEATURE_MAP_KINDS:
            raise ParameterError(f"unknown feature map kind '{self.kind}'")
        if self.kind == "identity" and self.output_width != self.input_width:
            raise ShapeError("an identity feature map keeps its input width")

    @classmethod
    def identity(cls, width: int) -> "FeatureMap":
        return cls("identity", int(width), int(width))

    @classmethod
    def random_fourier(cls, input_width: int, output_width: int = 200, bandwidth: float = 1.0, seed: int = 0) -> "FeatureMap":
        if output_width < 1:
            raise ParameterError(f"output_width must be >= 1, got {output_width}")
        if bandwidth <= 0:
            raise ParameterError(f"bandwidth must be > 0, got {bandwidth}")
        rng = np.random.default_rng([seed, 5])
        return cls(
            "random_fourier",
            int(input_width),
            int(output_width),
            frequencies=rng.normal(0.0, 1.0 / bandwidth, size=(input_width, output_width)),
            offsets=rng.uniform(0.0, 2.0 * np.pi, size=output_width),
        )

    def apply(self, x) -> np.ndarray:
        x = as_matrix(x, "features")
        if x.shape[1] != self.input_width:
            raise ShapeError(f"feature map expects {self.input_width} columns, got {x.shape[1]}")
        if self.kind == "identity":
            return x
        return np.sqrt(2.0 / self.output_width) * np.cos(x @ self.frequencies + self.offsets)

    def to_dict(self) -> dict:
        doc = {"kind": self.kind, "input_width": self.input_width, "output_width": self.output_width}
        if self.kind == "random_fourier":
            doc["frequencies"] = self.frequencies.tolist()
            doc["offsets"] = self.offsets.tolist()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureMap":
        try:
            if doc["kind"] == "identity":
                return cls.identity(doc["input_width"])
            return cls(
                doc["kind"],
                int(doc["input_width"]),
                int(doc["output_width"]),
                frequencies=np.asarray(doc["frequencies"], dtype=np.float64),
                offsets=np.asarray(doc["offsets"], dtype=np.float64),
            )
        except KeyError as e:
            raise InputError(f"malformed feature map document: missing {e}") from e
