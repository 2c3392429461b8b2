import json

import numpy as np
import pytest

from data.dataset import split
from data.synthetic import toy_classification, toy_regression
from preprocess.config import PreprocessorConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def classification_split():
    return split(toy_classification(600, seed=3), 0.25, seed=3)


@pytest.fixture
def regression_data():
    return toy_regression(400, seed=5)


@pytest.fixture
def quick_config():
    """Small networks and few epochs: exercises every step of training in well under a second."""
    return PreprocessorConfig(
        delta_x=0.1,
        lambda_f=1.0,
        epochs=2,
        batch_size=100,
        hidden_width=8,
        depth=2,
        dropout_rate=0.0,
        seed=11,
    )


@pytest.fixture
def experiment_file(tmp_path):
    """Writes a tiny toy experiment config and returns its path."""

    def _write(**sections):
        doc = {
            "dataset": {"source": "toy_classification", "n": 300, "seed": 0, "test_fraction": 0.3},
            "preprocessor": {"delta_x": 0.1, "epochs": 1, "batch_size": 100, "hidden_width": 8, "dropout_rate": 0.0},
            "sweep": {"delta_x": [0.1], "delta_y": [0.0], "lambda_f": [0.5, 2.0, 8.0]},
            "downstream": ["logistic_regression", "knn"],
            "downstream_settings": {"knn_neighbors": 5, "upstream_width": 8, "mlp_epochs": 2},
            "runs": 1,
            "output_dir": str(tmp_path / "out"),
        }
        for name, value in sections.items():
            if isinstance(value, dict) and isinstance(doc.get(name), dict):
                doc[name] = {**doc[name], **value}
            else:
                doc[name] = value
        path = tmp_path / "experiment.json"
        path.write_text(json.dumps(doc), encoding="utf-8")
        return str(path)

    return _write
