"""
preprocess/trainer.py
Constrained min-max bilevel training of the converters.

Every mini-batch runs four stages:

  1. T' inner rounds: one descent step of h on l(Y_bar, h(X_bar)) and one ascent
     step of the critic V on the chi^2 dual R_V(h(X_bar), A[, Y]);
  2. dual ascent of the budget multipliers, lambda += r * max(Delta - delta, 0);
  3. one descent step of G_X on l + lambda_F * R_V + sum_j lambda_Xj * max(Delta_Xj - delta_Xj, 0);
  4. one descent step of G_Y on l + lambda_Y * max(Delta_Y - delta_Y, 0) (skipped when delta_Y = 0).

The critic used in stage 3 is the last iterate of stage 1.
"""

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from data.dataset import Dataset
from data.schema import Schema
from hgr.dual import DualCritic, permute_rows, permute_within_strata
from preprocess.config import PreprocessorConfig
from preprocess.constraints import (
    ConstraintSpec,
    constraint_loss,
    constraint_loss_and_gradient,
    covariate_distances,
    named_distances,
    outcome_block,
)
from preprocess.converters import CovariateConverter, OutcomeConverter
from preprocess.upstream import UpstreamModel
from tensor_nn import AdamOptimizer, as_matrix, as_vector, check_rows
from utils.errors import InputError, ParameterError, TrainingDivergedError
from utils.file_handler import BundleHandler
from utils.logger import get_logger

logger = get_logger(__name__)

MIN_BATCH_ROWS = 2


# ----------------------------------------------------------------------
# Results
# ----------------------------------------------------------------------
@dataclass
class TrainingTrace:
    """Per-epoch multipliers and mean constraint values (one row per epoch)."""

    variable_names: List[str]
    lambda_x: List[List[float]] = field(default_factory=list)
    lambda_y: List[float] = field(default_factory=list)
    delta_x: List[List[float]] = field(default_factory=list)
    delta_y: List[float] = field(default_factory=list)
    loss: List[float] = field(default_factory=list)
    penalty: List[float] = field(default_factory=list)

    @property
    def multiplier_trace(self) -> List[tuple]:
        return list(zip(self.lambda_x, self.lambda_y))

    @property
    def constraint_trace(self) -> List[tuple]:
        return list(zip(self.delta_x, self.delta_y))

    def to_dict(self) -> dict:
        return {
            "variable_names": list(self.variable_names),
            "lambda_x": self.lambda_x,
            "lambda_y": self.lambda_y,
            "delta_x": self.delta_x,
            "delta_y": self.delta_y,
            "loss": self.loss,
            "penalty": self.penalty,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainingTrace":
        return cls(**doc)


@dataclass(frozen=True)
class ConstraintMeasurement:
    delta_x: Dict[str, float]
    delta_y: float

    def within(self, budgets: Dict[str, float], delta_y: float, tolerance: float = 0.0) -> bool:
        return all(self.delta_x[k] <= budgets[k] + tolerance for k in self.delta_x) and (
            self.delta_y <= delta_y + tolerance
        )

    def to_dict(self) -> dict:
        return {"delta_x": dict(self.delta_x), "delta_y": self.delta_y}


def _check_inputs(schema: Schema, x, a):
    x = as_matrix(x, "covariates")
    a = as_matrix(a, "sensitive")
    check_rows(("covariates", x), ("sensitive", a))
    if x.shape[1] != schema.x_width:
        raise InputError(f"covariates have {x.shape[1]} columns, the training schema has {schema.x_width}")
    if a.shape[1] != schema.a_width:
        raise InputError(f"sensitive block has {a.shape[1]} columns, the training schema has {schema.a_width}")
    return x, a


@dataclass(eq=False)
class TrainedPreprocessor:
    """G*_X, G*_Y, the upstream model, the last critic and the training traces."""

    schema: Schema
    config: PreprocessorConfig
    g_x: CovariateConverter
    g_y: Optional[OutcomeConverter]
    h_up: UpstreamModel
    critic: DualCritic
    trace: TrainingTrace

    def transform_covariates(self, x, a) -> np.ndarray:
        """X~ = G*_X(X, A); one-hot blocks come out as hard samples from a seeded stream."""
        x, a = _check_inputs(self.schema, x, a)
        rng = np.random.default_rng([self.config.seed, 2])
        return self.g_x.forward(x, a, training=False, rng=rng, hard=True)

    def transform_outcome(self, x, a, y) -> np.ndarray:
        """Y~ = G*_Y(X, A, Y), or Y itself when no outcome budget was configured."""
        y = as_vector(y, "outcome")
        if self.g_y is None:
            return y.copy()
        x, a = _check_inputs(self.schema, x, a)
        check_rows(("covariates", x), ("outcome", y))
        kind = ConstraintSpec.for_schema(self.schema).y_kind
        rng = np.random.default_rng([self.config.seed, 4])
        out = self.g_y.forward(x, a, outcome_block(y, kind), training=False, rng=rng, hard=True)
        return out[:, 1].copy() if self.g_y.categorical else out[:, 0].copy()

    def transform(self, dataset: Dataset) -> Dataset:
        """D~ = (X~, A, Y~)."""
        x_tilde = self.transform_covariates(dataset.x, dataset.a)
        y_tilde = self.transform_outcome(dataset.x, dataset.a, dataset.y)
        return dataset.with_transformed(x_tilde, y_tilde)

    def upstream_scores(self, x_tilde) -> np.ndarray:
        return self.h_up.predict(as_matrix(x_tilde, "transformed covariates"))

    # ------------------------------------------------------------------
    # Checkpoint bundle
    # ------------------------------------------------------------------
    def save(self, directory: str) -> str:
        bundle = BundleHandler(directory, config=self.config.to_dict())
        bundle.write_document("schema.json", {"schema": self.schema.to_dict()})
        bundle.write_document("config.json", {"preprocessor": self.config.to_dict()})
        bundle.write_document("g_x.json", {"converter": self.g_x.to_dict()})
        bundle.write_document("g_y.json", {"converter": None if self.g_y is None else self.g_y.to_dict()})
        bundle.write_document("h_up.json", {"model": self.h_up.to_dict()})
        bundle.write_document("critic.json", {"critic": self.critic.to_dict()})
        bundle.write_document("traces.json", {"trace": self.trace.to_dict()})
        return bundle.finalize()

    @classmethod
    def load(cls, directory: str) -> "TrainedPreprocessor":
        bundle = BundleHandler.open(directory)
        try:
            g_y_doc = bundle.read_document("g_y.json")["converter"]
            return cls(
                schema=Schema.from_dict(bundle.read_document("schema.json")["schema"]),
                config=PreprocessorConfig.from_dict(bundle.read_document("config.json")["preprocessor"]),
                g_x=CovariateConverter.from_dict(bundle.read_document("g_x.json")["converter"]),
                g_y=None if g_y_doc is None else OutcomeConverter.from_dict(g_y_doc),
                h_up=UpstreamModel.from_dict(bundle.read_document("h_up.json")["model"]),
                critic=DualCritic.from_dict(bundle.read_document("critic.json")["critic"]),
                trace=TrainingTrace.from_dict(bundle.read_document("traces.json")["trace"]),
            )
        except KeyError as e:
            raise InputError(f"bundle '{directory}' is missing entry {e}") from e


class IdentityPreprocessor:
    """Same transform API as TrainedPreprocessor; returns its inputs unchanged."""

    def __init__(self, schema: Schema):
        self.schema = schema

    def transform_covariates(self, x, a) -> np.ndarray:
        x, _ = _check_inputs(self.schema, x, a)
        return x.copy()

    def transform_outcome(self, x, a, y) -> np.ndarray:
        return as_vector(y, "outcome").copy()

    def transform(self, dataset: Dataset) -> Dataset:
        return dataset.with_transformed(dataset.x.copy(), dataset.y.copy())


def transform_covariates(pp, x, a) -> np.ndarray:
    return pp.transform_covariates(x, a)


def transform_outcome(pp, x, a, y) -> np.ndarray:
    return pp.transform_outcome(x, a, y)


def measure_constraints(pp, dataset: Dataset) -> ConstraintMeasurement:
    """Per-variable Delta_X and Delta_Y of the inference-mode transform on ``dataset``."""
    spec = ConstraintSpec.for_schema(dataset.schema)
    x_tilde = pp.transform_covariates(dataset.x, dataset.a)
    y_tilde = pp.transform_outcome(dataset.x, dataset.a, dataset.y)
    delta_x = covariate_distances(spec, dataset.x, x_tilde)
    delta_y = constraint_loss(spec.y_kind, outcome_block(dataset.y, spec.y_kind), outcome_block(y_tilde, spec.y_kind))
    return ConstraintMeasurement(delta_x=named_distances(spec, delta_x), delta_y=delta_y)


# ----------------------------------------------------------------------
# Training
# ----------------------------------------------------------------------
class _MinMaxTrainer:
    """Owns the four networks, their optimisers and the multipliers of one run."""

    def __init__(self, dataset: Dataset, config: PreprocessorConfig):
        self.dataset = dataset
        self.config = config
        self.spec = ConstraintSpec.for_schema(dataset.schema)
        self.budgets = config.budgets(len(self.spec))
        self.rng = np.random.default_rng(config.seed)
        self.separation = config.fairness_notion == "separation"
        self.classification = dataset.task == "classification"
        self.y_block = outcome_block(dataset.y, self.spec.y_kind)

        schema, seed = dataset.schema, config.seed
        width, depth = config.hidden_width, config.depth
        self.g_x = CovariateConverter.build(
            schema.covariate_blocks, schema.a_width, width, depth, config.dropout_rate, config.temperature, seed
        )
        self.g_y = None
        if config.transforms_outcome:
            self.g_y = OutcomeConverter.build(
                schema.outcome.kind, schema.x_width + schema.a_width, width, depth,
                config.dropout_rate, config.temperature, seed + 101,
            )
        self.h = UpstreamModel.build(schema.x_width, dataset.task, config, seed + 202)
        signal_width = 1 if config.penalty_target == "prediction" else schema.x_width
        self.critic = DualCritic.build(
            signal_width, schema.a_width, conditional=self.separation, width=width, seed=seed + 303
        )

        self.h_opt = AdamOptimizer(self.h.net.parameters(), learning_rate=config.lr_h)
        self.v_opt = AdamOptimizer(self.critic.net.parameters(), learning_rate=config.lr_v)
        self.gx_opt = AdamOptimizer(self.g_x.parameters(), learning_rate=config.lr_g)
        self.gy_opt = None if self.g_y is None else AdamOptimizer(self.g_y.parameters(), learning_rate=config.lr_g)

        self.lambda_x = np.zeros(len(self.spec))
        self.lambda_y = 0.0
        self.trace = TrainingTrace(variable_names=self.spec.names)
        self._where = {}

    # ------------------------------------------------------------------
    def _target(self, y_bar_block: np.ndarray) -> np.ndarray:
        return y_bar_block[:, 1] if self.classification else y_bar_block[:, 0]

    def _product_permutation(self, y_batch: np.ndarray) -> np.ndarray:
        if not self.separation:
            return permute_rows(len(y_batch), self.rng)
        perm, _ = permute_within_strata(y_batch, self.rng)
        return perm

    def _outcome(self, xb, ab, yb_block, training=True):
        if self.g_y is None:
            return yb_block
        return self.g_y.forward(xb, ab, yb_block, training=training, rng=self.rng)

    def _penalty_signal(self, x_bar, outputs=None):
        if self.config.penalty_target == "data":
            return x_bar
        if outputs is None:
            outputs = self.h.net.forward(x_bar)
        return self.h.signal(outputs)

    def _guard(self, stage: str, **values) -> None:
        for name, value in values.items():
            if not np.all(np.isfinite(value)):
                snapshot = dict(self._where)
                snapshot.update(
                    stage=stage,
                    quantity=name,
                    lambda_x=self.lambda_x.tolist(),
                    lambda_y=self.lambda_y,
                )
                raise TrainingDivergedError(
                    f"{name} became NaN/Inf during {stage} (epoch {snapshot.get('epoch')}, batch {snapshot.get('batch')})",
                    snapshot,
                )

    # ------------------------------------------------------------------
    def _inner_rounds(self, xb, ab, yb, yb_block):
        """Descend h, ascend V; returns the last (X_bar, Y_bar block, loss)."""
        y_cond = yb if self.separation else None
        for _ in range(self.config.t_prime):
            x_bar = self.g_x.forward(xb, ab, training=True, rng=self.rng)
            y_bar_block = self._outcome(xb, ab, yb_block)
            self._guard("upstream step", x_bar=x_bar, y_bar=y_bar_block)
            outputs = self.h.net.forward(x_bar, training=True)
            loss, d_out, _ = self.h.loss_gradients(outputs, self._target(y_bar_block))
            self._guard("upstream step", loss=loss)
            self.h_opt.step(self.h.net.backward(d_out).params)

            signal = self._penalty_signal(x_bar)
            perm = self._product_permutation(yb)
            _, v_grads, _ = self.critic.objective_and_gradients(signal, ab, ab[perm], y_cond)
            self.v_opt.step(v_grads, ascend=True)
        return x_bar, y_bar_block, loss

    def _update_multipliers(self, xb, x_bar, yb_block, y_bar_block):
        delta_x = covariate_distances(self.spec, xb, x_bar)
        delta_y = 0.0
        if self.g_y is not None:
            delta_y = constraint_loss(self.spec.y_kind, yb_block, y_bar_block)
        self.lambda_x = self.lambda_x + self.config.rate_x * np.maximum(delta_x - self.budgets, 0.0)
        self.lambda_y = self.lambda_y + self.config.rate_y * max(delta_y - self.config.delta_y, 0.0)
        return delta_x, delta_y

    def _covariate_step(self, xb, ab, yb, y_bar_block) -> float:
        config = self.config
        x_bar = self.g_x.forward(xb, ab, training=True, rng=self.rng)
        self._guard("converter step", x_bar=x_bar)
        outputs = self.h.net.forward(x_bar, training=True)
        _, d_out, _ = self.h.loss_gradients(outputs, self._target(y_bar_block))

        perm = self._product_permutation(yb)
        y_cond = yb if self.separation else None
        signal = self._penalty_signal(x_bar, outputs)
        penalty, _, d_signal = self.critic.objective_and_gradients(signal, ab, ab[perm], y_cond)
        self._guard("converter step", penalty=penalty)

        if config.penalty_target == "prediction":
            d_out[:, 1 if self.classification else 0] += config.lambda_f * d_signal[:, 0]
            d_x_bar = self.h.net.backward(d_out).input
        else:
            d_x_bar = self.h.net.backward(d_out).input + config.lambda_f * d_signal

        for j, (block, kind) in enumerate(zip(self.spec.x_blocks, self.spec.x_kinds)):
            cols = slice(block.start, block.stop)
            value, grad = constraint_loss_and_gradient(kind, xb[:, cols], x_bar[:, cols])
            if value > self.budgets[j]:
                d_x_bar[:, cols] += self.lambda_x[j] * grad
        self.gx_opt.step(self.g_x.backward(d_x_bar))
        return penalty

    def _outcome_step(self, xb, ab, yb_block) -> None:
        x_bar = self.g_x.forward(xb, ab, training=True, rng=self.rng)
        y_bar_block = self.g_y.forward(xb, ab, yb_block, training=True, rng=self.rng)
        self._guard("outcome step", x_bar=x_bar, y_bar=y_bar_block)
        outputs = self.h.net.forward(x_bar, training=True)
        _, _, d_target = self.h.loss_gradients(outputs, self._target(y_bar_block))
        d_block = np.zeros_like(y_bar_block)
        d_block[:, 1 if self.classification else 0] = d_target
        value, grad = constraint_loss_and_gradient(self.spec.y_kind, yb_block, y_bar_block)
        if value > self.config.delta_y:
            d_block += self.lambda_y * grad
        self.gy_opt.step(self.g_y.backward(d_block))

    # ------------------------------------------------------------------
    def run_epoch(self, epoch: int) -> None:
        data, config = self.dataset, self.config
        n = len(data)
        order = self.rng.permutation(n)
        deltas_x, deltas_y, losses, penalties = [], [], [], []
        for batch, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            if len(idx) < MIN_BATCH_ROWS:
                logger.debug(f"epoch {epoch}: skipping batch {batch} with {len(idx)} row(s)")
                continue
            self._where = {"epoch": epoch, "batch": batch}
            xb, ab, yb, yb_block = data.x[idx], data.a[idx], data.y[idx], self.y_block[idx]

            x_bar, y_bar_block, loss = self._inner_rounds(xb, ab, yb, yb_block)
            delta_x, delta_y = self._update_multipliers(xb, x_bar, yb_block, y_bar_block)
            penalty = self._covariate_step(xb, ab, yb, y_bar_block)
            if self.g_y is not None:
                self._outcome_step(xb, ab, yb_block)

            deltas_x.append(delta_x)
            deltas_y.append(delta_y)
            losses.append(loss)
            penalties.append(penalty)

        trace = self.trace
        trace.lambda_x.append(self.lambda_x.tolist())
        trace.lambda_y.append(float(self.lambda_y))
        trace.delta_x.append(np.mean(deltas_x, axis=0).tolist())
        trace.delta_y.append(float(np.mean(deltas_y)))
        trace.loss.append(float(np.mean(losses)))
        trace.penalty.append(float(np.mean(penalties)))
        logger.debug(
            f"epoch {epoch}: loss {trace.loss[-1]:.4f} R_V {trace.penalty[-1]:.4f} "
            f"Delta_X {np.round(trace.delta_x[-1], 4).tolist()} Delta_Y {trace.delta_y[-1]:.4f} "
            f"lambda_X {np.round(self.lambda_x, 4).tolist()} lambda_Y {self.lambda_y:.4f}"
        )

    def result(self) -> TrainedPreprocessor:
        return TrainedPreprocessor(
            schema=self.dataset.schema,
            config=self.config,
            g_x=self.g_x,
            g_y=self.g_y,
            h_up=self.h,
            critic=self.critic,
            trace=self.trace,
        )


def train(dataset: Dataset, config: PreprocessorConfig) -> TrainedPreprocessor:
    """Run the constrained min-max bilevel optimisation on ``dataset``."""
    if config.fairness_notion == "separation" and dataset.task != "classification":
        raise ParameterError("fairness_notion: separation needs a categorical outcome")
    if config.batch_size < MIN_BATCH_ROWS:
        raise ParameterError(f"batch_size: training needs batches of at least {MIN_BATCH_ROWS} rows")
    if len(dataset) < MIN_BATCH_ROWS:
        raise InputError(f"training needs at least {MIN_BATCH_ROWS} rows, got {len(dataset)}")

    trainer = _MinMaxTrainer(dataset, config)
    logger.info(
        f"Training preprocessor on {len(dataset)} rows: lambda_F={config.lambda_f}, "
        f"delta_X={config.delta_x}, delta_Y={config.delta_y}, notion={config.fairness_notion}, "
        f"target={config.penalty_target}, epochs={config.epochs}"
    )
    started = time.time()
    for epoch in range(config.epochs):
        trainer.run_epoch(epoch)
    trace = trainer.trace
    logger.info(
        f"Training finished in {time.time() - started:.1f}s: loss {trace.loss[-1]:.4f}, "
        f"R_V {trace.penalty[-1]:.4f}, Delta_X {np.round(trace.delta_x[-1], 4).tolist()}"
    )
    return trainer.result()
