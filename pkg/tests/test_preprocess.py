import json
import os

import numpy as np
import pytest

from data.dataset import split
from data.schema import ColumnBlock
from data.synthetic import toy_classification, toy_classification_schema, toy_regression_split
from downstream import MODEL_KINDS, DownstreamSettings, FeatureMap, compose, fit_zoo
from hgr.exact import hgr_binned
from metrics import evaluate_scores, prediction_loss, risk_spread
from preprocess import (
    ConstraintSpec,
    CovariateConverter,
    IdentityPreprocessor,
    OutcomeConverter,
    PreprocessorConfig,
    TrainedPreprocessor,
    UpstreamModel,
    constraint_loss,
    constraint_loss_and_gradient,
    covariate_distances,
    fit_plain_upstream,
    fit_supervised,
    measure_constraints,
    outcome_block,
    train,
    transform_covariates,
    transform_outcome,
)
from preprocess.trainer import _MinMaxTrainer
from utils.errors import InputError, IntegrityError, ParameterError


def _finite_difference(fn, array, eps=1e-6):
    numeric = np.zeros_like(array)
    for idx in np.ndindex(array.shape):
        saved = array[idx]
        array[idx] = saved + eps
        up = fn()
        array[idx] = saved - eps
        down = fn()
        array[idx] = saved
        numeric[idx] = (up - down) / (2 * eps)
    return numeric


def _fairness_gap(scores, a):
    groups = a[:, 1]
    return abs(scores[groups == 1].mean() - scores[groups == 0].mean())


# ----------------------------------------------------------------------
# Configuration
# ----------------------------------------------------------------------
@pytest.mark.parametrize(
    "field, value",
    [("delta_x", -0.1), ("delta_y", -1.0), ("lambda_f", -2.0), ("t_prime", 0), ("epochs", 0), ("lr_g", -1e-3)],
)
def test_config_rejects_out_of_range_values(field, value):
    with pytest.raises(ParameterError, match=f"^{field}"):
        PreprocessorConfig(**{field: value})


def test_config_rejects_unknown_choices():
    with pytest.raises(ParameterError, match="fairness_notion"):
        PreprocessorConfig(fairness_notion="calibration")
    with pytest.raises(ParameterError, match="penalty_target"):
        PreprocessorConfig(penalty_target="labels")
    with pytest.raises(ParameterError, match="unknown preprocessor setting"):
        PreprocessorConfig.from_dict({"lambda": 1.0})


def test_config_budgets_broadcast_or_match():
    np.testing.assert_array_equal(PreprocessorConfig(delta_x=0.2).budgets(3), [0.2, 0.2, 0.2])
    np.testing.assert_array_equal(PreprocessorConfig(delta_x=[0.1, 0.2, 0.3]).budgets(3), [0.1, 0.2, 0.3])
    with pytest.raises(ParameterError, match="delta_x"):
        PreprocessorConfig(delta_x=[0.1, 0.2]).budgets(3)


def test_config_document_round_trip():
    config = PreprocessorConfig(delta_x=[0.1, 0.2], delta_y=0.05, loss="squared_error", seed=4)
    assert PreprocessorConfig.from_dict(json.loads(json.dumps(config.to_dict()))) == config
    assert config.replace(lambda_f=3.0).lambda_f == 3.0
    assert config.loss_for("classification") == "squared_error"
    assert PreprocessorConfig().loss_for("classification") == "cross_entropy"
    assert PreprocessorConfig().loss_for("regression") == "squared_error"
    assert config.transforms_outcome and not PreprocessorConfig().transforms_outcome


# ----------------------------------------------------------------------
# Constraint distances
# ----------------------------------------------------------------------
def test_hinge_distance_example():
    assert constraint_loss("hinge", [[1.0, 0.0]], [[0.9, 0.1]]) == pytest.approx(0.2)


def test_hinge_distance_is_zero_for_identical_one_hot():
    block = np.eye(3)[[0, 2, 1, 1]]
    assert constraint_loss("hinge", block, block) == 0.0
    assert constraint_loss("hinge", block, np.eye(3)[[1, 2, 1, 1]]) == pytest.approx(0.5)


def test_outcome_hinge_distance_grows_with_flipped_labels():
    y = np.tile([0.0, 1.0], 50)
    original = outcome_block(y, "hinge")
    distances = []
    for flips in range(0, 101, 10):
        flipped = y.copy()
        flipped[:flips] = 1.0 - flipped[:flips]
        distances.append(constraint_loss("hinge", original, outcome_block(flipped, "hinge")))
    assert all(b >= a for a, b in zip(distances, distances[1:]))
    np.testing.assert_allclose(distances, [2.0 * f / 100 for f in range(0, 101, 10)])


def test_mae_distance_example():
    assert constraint_loss("mae", [[0.0], [1.0]], [[0.5], [0.5]]) == pytest.approx(0.5)


def test_distance_contract_errors():
    with pytest.raises(InputError):
        constraint_loss("hinge", [[0.5, 0.5]], [[0.5, 0.5]])
    with pytest.raises(InputError):
        constraint_loss("mae", [[0.0]], [[0.0, 1.0]])
    with pytest.raises(InputError):
        constraint_loss("l2", [[0.0]], [[0.0]])


@pytest.mark.parametrize("kind", ["mae", "hinge"])
def test_distance_gradients_match_finite_differences(kind, rng):
    original = np.eye(3)[rng.integers(0, 3, 8)] if kind == "hinge" else rng.normal(size=(8, 2))
    transformed = original + rng.normal(scale=0.3, size=original.shape)
    _, analytic = constraint_loss_and_gradient(kind, original, transformed)
    numeric = _finite_difference(lambda: constraint_loss(kind, original, transformed), transformed)
    np.testing.assert_allclose(numeric, analytic, atol=1e-6)


def test_constraint_spec_follows_schema():
    spec = ConstraintSpec.for_schema(toy_classification_schema())
    assert spec.names == ["x1", "x2", "x3"]
    assert spec.x_kinds == ("mae", "mae", "hinge")
    assert spec.y_kind == "hinge"
    assert len(spec) == 3


def test_covariate_distances_are_per_variable():
    spec = ConstraintSpec.for_schema(toy_classification_schema())
    x = np.array([[0.0, 0.0, 1.0, 0.0, 0.0], [1.0, 1.0, 0.0, 1.0, 0.0]])
    moved = x.copy()
    moved[:, 0] += 0.5
    moved[1, 2:] = [0.0, 0.0, 1.0]
    np.testing.assert_allclose(covariate_distances(spec, x, moved), [0.5, 0.0, 1.0])


def test_outcome_block_layout():
    np.testing.assert_array_equal(outcome_block(np.array([0.0, 1.0]), "hinge"), [[1, 0], [0, 1]])
    assert outcome_block(np.array([0.3, 1.2]), "mae").shape == (2, 1)


# ----------------------------------------------------------------------
# Converters and the upstream model
# ----------------------------------------------------------------------
def test_fresh_covariate_converter_is_near_identity(rng):
    blocks = toy_classification_schema().covariate_blocks
    g_x = CovariateConverter.build(blocks, 2, width=8, depth=2, dropout_rate=0.0, temperature=0.5, seed=0)
    data = toy_classification(200, seed=1)
    out = g_x.forward(data.x, data.a, rng=rng, hard=True)
    assert np.abs(out[:, :2] - data.x[:, :2]).max() < 0.5
    assert np.mean(np.all(out[:, 2:] == data.x[:, 2:], axis=1)) > 0.9
    np.testing.assert_array_equal(out[:, 2:].sum(axis=1), 1.0)


def test_covariate_converter_rejects_wrong_width(rng):
    blocks = [ColumnBlock("x", "continuous", 0, 1)]
    g_x = CovariateConverter.build(blocks, 2, width=4, depth=1, dropout_rate=0.0, temperature=0.5, seed=0)
    with pytest.raises(InputError):
        g_x.forward(np.zeros((3, 2)), np.zeros((3, 2)), rng=rng)


def test_converter_backward_matches_finite_differences(rng):
    blocks = [ColumnBlock("u", "continuous", 0, 1), ColumnBlock("v", "continuous", 1, 2)]
    g_x = CovariateConverter.build(blocks, 1, width=5, depth=2, dropout_rate=0.0, temperature=0.5, seed=3)
    for head in g_x.heads:
        head.net.layers[-1].weight[:] = rng.normal(size=head.net.layers[-1].weight.shape)
    x, a = rng.normal(size=(6, 2)), rng.integers(0, 2, size=(6, 1)).astype(float)
    weights = rng.normal(size=(6, 2))

    g_x.forward(x, a, training=True, rng=rng)
    analytic = g_x.backward(weights)
    for param, grad in zip(g_x.parameters(), analytic):
        numeric = _finite_difference(lambda: float(np.sum(g_x.forward(x, a, rng=rng) * weights)), param)
        np.testing.assert_allclose(numeric, grad, atol=1e-5)


def test_outcome_converter_emits_binary_one_hot(rng):
    g_y = OutcomeConverter.build("categorical", 7, width=8, depth=2, dropout_rate=0.0, temperature=0.5, seed=0)
    data = toy_classification(100, seed=2)
    out = g_y.forward(data.x, data.a, outcome_block(data.y, "hinge"), rng=rng, hard=True)
    assert out.shape == (100, 2) and g_y.categorical
    np.testing.assert_array_equal(out.sum(axis=1), 1.0)


def test_converter_documents_round_trip(rng):
    blocks = toy_classification_schema().covariate_blocks
    g_x = CovariateConverter.build(blocks, 2, width=8, depth=2, dropout_rate=0.0, temperature=0.5, seed=0)
    restored = CovariateConverter.from_dict(json.loads(json.dumps(g_x.to_dict())))
    data = toy_classification(50, seed=3)
    np.testing.assert_array_equal(
        g_x.forward(data.x, data.a, rng=np.random.default_rng(1), hard=True),
        restored.forward(data.x, data.a, rng=np.random.default_rng(1), hard=True),
    )


@pytest.mark.parametrize("task, loss", [("classification", "cross_entropy"), ("classification", "squared_error"),
                                        ("regression", "squared_error"), ("regression", "cross_entropy")])
def test_upstream_loss_gradients_match_finite_differences(task, loss, rng):
    model = UpstreamModel.build(3, task, PreprocessorConfig(hidden_width=4, depth=1, loss=loss), seed=0)
    if task == "classification":
        outputs = rng.dirichlet(np.ones(2), size=5)
    else:
        outputs = rng.uniform(0.1, 0.9, size=(5, 1))
    target = rng.uniform(0.0, 1.0, size=5)
    _, d_out, d_target = model.loss_gradients(outputs, target)
    np.testing.assert_allclose(
        _finite_difference(lambda: model.loss_gradients(outputs, target)[0], outputs), d_out, atol=1e-6
    )
    np.testing.assert_allclose(
        _finite_difference(lambda: model.loss_gradients(outputs, target)[0], target), d_target, atol=1e-6
    )


def test_cross_entropy_is_clipped():
    model = UpstreamModel.build(1, "classification", PreprocessorConfig(hidden_width=2, depth=1), seed=0)
    loss, _, _ = model.loss_gradients(np.array([[1.0, 0.0]]), np.array([1.0]))
    assert loss == pytest.approx(-np.log(1e-7))


def test_supervised_fit_reduces_risk(classification_split):
    train_data, _ = classification_split
    config = PreprocessorConfig(epochs=30, batch_size=50, hidden_width=16, dropout_rate=0.0, lr_h=5e-3)
    untrained = UpstreamModel.build(train_data.x.shape[1], "classification", config, seed=config.seed)
    fitted = fit_supervised(train_data.x, train_data.y, "classification", config)
    assert fitted.risk(train_data.x, train_data.y) < untrained.risk(train_data.x, train_data.y)
    assert fit_plain_upstream(train_data, config).predict(train_data.x).shape == (len(train_data),)


# ----------------------------------------------------------------------
# Training
# ----------------------------------------------------------------------
def test_multiplier_step_is_rate_times_violation(classification_split, quick_config):
    train_data, _ = classification_split
    trainer = _MinMaxTrainer(train_data, quick_config.replace(delta_x=0.0, rate_x=1.0))
    x = np.zeros((4, 5))
    x[:, 2] = 1.0
    moved = x.copy()
    moved[:, 0] += 0.2
    trainer._update_multipliers(x, moved, np.eye(2)[[0, 1, 0, 1]], np.eye(2)[[0, 1, 0, 1]])
    np.testing.assert_allclose(trainer.lambda_x, [0.2, 0.0, 0.0])
    trainer._update_multipliers(x, x, np.eye(2)[[0, 1, 0, 1]], np.eye(2)[[0, 1, 0, 1]])
    np.testing.assert_allclose(trainer.lambda_x, [0.2, 0.0, 0.0])


def test_train_produces_traces_and_hard_one_hot_output(classification_split, quick_config):
    train_data, test_data = classification_split
    pp = train(train_data, quick_config)
    assert len(pp.trace.loss) == quick_config.epochs
    assert len(pp.trace.multiplier_trace) == quick_config.epochs
    lambdas = np.array(pp.trace.lambda_x)
    assert np.all(lambdas >= 0) and np.all(np.diff(lambdas, axis=0) >= 0)

    x_tilde = transform_covariates(pp, test_data.x, test_data.a)
    assert x_tilde.shape == test_data.x.shape
    assert set(np.unique(x_tilde[:, 2:])) <= {0.0, 1.0}
    np.testing.assert_array_equal(x_tilde[:, 2:].sum(axis=1), 1.0)
    np.testing.assert_array_equal(transform_outcome(pp, test_data.x, test_data.a, test_data.y), test_data.y)
    assert pp.g_y is None


def test_inference_transform_is_deterministic(classification_split, quick_config):
    train_data, test_data = classification_split
    pp = train(train_data, quick_config)
    again = train(train_data, quick_config)
    np.testing.assert_array_equal(
        pp.transform_covariates(test_data.x, test_data.a), again.transform_covariates(test_data.x, test_data.a)
    )
    np.testing.assert_array_equal(
        pp.transform_covariates(test_data.x, test_data.a), pp.transform_covariates(test_data.x, test_data.a)
    )
    assert pp.trace.to_dict() == again.trace.to_dict()


def test_same_seed_gives_bit_identical_parameters(classification_split, quick_config):
    train_data, _ = classification_split
    first = train(train_data, quick_config.replace(dropout_rate=0.2, delta_y=0.1))
    second = train(train_data, quick_config.replace(dropout_rate=0.2, delta_y=0.1))
    for name in ("g_x", "g_y"):
        for p, q in zip(getattr(first, name).parameters(), getattr(second, name).parameters()):
            assert np.array_equal(p, q), name
    for p, q in zip(first.h_up.net.parameters() + first.critic.net.parameters(),
                    second.h_up.net.parameters() + second.critic.net.parameters()):
        assert np.array_equal(p, q)


def test_outcome_budget_trains_an_outcome_converter(classification_split, quick_config):
    train_data, _ = classification_split
    pp = train(train_data, quick_config.replace(delta_y=0.1))
    assert pp.g_y is not None
    y_tilde = pp.transform_outcome(train_data.x, train_data.a, train_data.y)
    assert set(np.unique(y_tilde)) <= {0.0, 1.0}
    transformed = pp.transform(train_data)
    assert transformed.y.shape == train_data.y.shape and transformed.x.shape == train_data.x.shape


@pytest.mark.parametrize(
    "changes", [{"fairness_notion": "separation"}, {"penalty_target": "data"}, {"t_prime": 2}, {"delta_x": [0.1, 0.2, 0.3]}]
)
def test_training_variants_run(classification_split, quick_config, changes):
    train_data, _ = classification_split
    pp = train(train_data, quick_config.replace(epochs=1, **changes))
    assert np.all(np.isfinite(pp.trace.penalty))
    assert pp.critic.conditional == (changes.get("fairness_notion") == "separation")


def test_regression_training_runs(regression_data, quick_config):
    pp = train(regression_data, quick_config)
    assert pp.h_up.task == "regression"
    assert pp.transform_covariates(regression_data.x, regression_data.a).shape == (len(regression_data), 1)


def test_training_preconditions(regression_data, classification_split, quick_config):
    with pytest.raises(ParameterError, match="fairness_notion"):
        train(regression_data, quick_config.replace(fairness_notion="separation"))
    with pytest.raises(InputError):
        train(regression_data.subset([0]), quick_config)
    with pytest.raises(ParameterError, match="batch_size"):
        train(regression_data, quick_config.replace(batch_size=1))
    with pytest.raises(ParameterError, match="delta_x"):
        train(classification_split[0], quick_config.replace(delta_x=[0.1, 0.2]))


def test_transform_rejects_foreign_schema(classification_split, regression_data, quick_config):
    pp = train(classification_split[0], quick_config.replace(epochs=1))
    with pytest.raises(InputError):
        pp.transform_covariates(regression_data.x, regression_data.a)


def test_identity_preprocessor_returns_inputs(classification_split):
    _, test_data = classification_split
    identity = IdentityPreprocessor(test_data.schema)
    np.testing.assert_array_equal(identity.transform_covariates(test_data.x, test_data.a), test_data.x)
    np.testing.assert_array_equal(identity.transform(test_data).y, test_data.y)
    measured = measure_constraints(identity, test_data)
    assert all(v == 0.0 for v in measured.delta_x.values()) and measured.delta_y == 0.0


def test_bundle_round_trip(tmp_path, classification_split, quick_config):
    train_data, test_data = classification_split
    pp = train(train_data, quick_config.replace(delta_y=0.05))
    directory = pp.save(str(tmp_path / "bundle"))
    for name in ("schema.json", "config.json", "g_x.json", "g_y.json", "h_up.json", "critic.json", "traces.json",
                 "manifest.json"):
        assert os.path.isfile(os.path.join(directory, name))
    restored = TrainedPreprocessor.load(directory)
    assert restored.config == pp.config
    np.testing.assert_array_equal(
        restored.transform_covariates(test_data.x, test_data.a), pp.transform_covariates(test_data.x, test_data.a)
    )
    np.testing.assert_array_equal(
        restored.transform_outcome(test_data.x, test_data.a, test_data.y),
        pp.transform_outcome(test_data.x, test_data.a, test_data.y),
    )
    assert restored.trace.to_dict() == pp.trace.to_dict()


def test_tampered_bundle_is_rejected(tmp_path, classification_split, quick_config):
    pp = train(classification_split[0], quick_config.replace(epochs=1))
    directory = pp.save(str(tmp_path / "bundle"))
    with open(os.path.join(directory, "h_up.json"), "a", encoding="utf-8") as f:
        f.write(" ")
    with pytest.raises(IntegrityError):
        TrainedPreprocessor.load(directory)


@pytest.mark.slow
def test_penalty_free_limit_stays_close_to_plain_training():
    train_data, _ = split(toy_classification(2000, seed=4), 0.2, seed=4)
    config = PreprocessorConfig(
        delta_x=0.0, delta_y=0.0, lambda_f=0.0, epochs=30, batch_size=100, hidden_width=16, dropout_rate=0.0, seed=2
    )
    pp = train(train_data, config)
    measured = measure_constraints(pp, train_data)
    assert max(measured.delta_x.values()) <= 0.05
    plain = fit_plain_upstream(train_data, config)
    x_tilde = pp.transform_covariates(train_data.x, train_data.a)
    assert pp.h_up.risk(x_tilde, train_data.y) <= 1.1 * plain.risk(train_data.x, train_data.y)


@pytest.mark.slow
def test_constraints_hold_on_held_out_data():
    train_data, test_data = split(toy_classification(3000, seed=6), 0.2, seed=6)
    config = PreprocessorConfig(delta_x=0.1, delta_y=0.1, lambda_f=1.0, epochs=40, batch_size=100,
                                hidden_width=16, dropout_rate=0.0, seed=1)
    pp = train(train_data, config)
    budgets = {name: 0.1 for name in pp.trace.variable_names}
    assert measure_constraints(pp, test_data).within(budgets, 0.1, tolerance=0.05)
    lambdas = np.array(pp.trace.lambda_x)
    assert np.all(np.diff(lambdas, axis=0) >= 0) and np.all(np.diff(pp.trace.lambda_y) >= 0)


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_stronger_penalty_shrinks_the_fairness_gap(seed):
    train_data, test_data = toy_regression_split(seed)
    kinds = ("logistic_regression", "knn", "random_feature_linear")
    gaps = {name: [] for name in ("upstream",) + kinds}
    errors = {name: [] for name in gaps}
    for lambda_f in (0.1, 1.0, 10.0):
        config = PreprocessorConfig(delta_x=0.3, lambda_f=lambda_f, epochs=40, batch_size=150,
                                    hidden_width=32, dropout_rate=0.0, seed=seed)
        pp = train(train_data, config)
        x_test = pp.transform_covariates(test_data.x, test_data.a)
        train_t = pp.transform(train_data)
        scores = {"upstream": pp.upstream_scores(x_test)}
        zoo = fit_zoo(kinds, train_t.x, train_t.y, DownstreamSettings(knn_neighbors=15), seed, "regression")
        scores.update({kind: model.score(x_test) for kind, model in zoo.items()})
        for name, s in scores.items():
            gaps[name].append(_fairness_gap(s, test_data.a))
            errors[name].append(evaluate_scores(s, test_data.y, test_data.groups, "regression").loss)
    for name in gaps:
        assert gaps[name][0] > gaps[name][1] > gaps[name][2], name
        assert gaps[name][2] <= 0.7 * gaps[name][0], name
        assert errors[name][2] >= errors[name][0], name


@pytest.mark.slow
def test_outcome_budget_does_not_worsen_the_upstream_tradeoff():
    train_data, _ = split(toy_classification(3000, seed=8), 0.2, seed=8)
    measured = {}
    for delta_y in (0.0, 0.1):
        config = PreprocessorConfig(delta_x=0.1, delta_y=delta_y, lambda_f=5.0, epochs=40, batch_size=100,
                                    hidden_width=16, dropout_rate=0.0, seed=3)
        pp = train(train_data, config)
        x_tilde = pp.transform_covariates(train_data.x, train_data.a)
        y_tilde = pp.transform_outcome(train_data.x, train_data.a, train_data.y)
        rho = hgr_binned(pp.upstream_scores(x_tilde), train_data.groups)
        measured[delta_y] = (pp.h_up.risk(x_tilde, y_tilde), rho)
    assert measured[0.1][0] <= measured[0.0][0] + 0.02
    assert measured[0.1][1] <= measured[0.0][1] + 0.05


@pytest.fixture(scope="module")
def strong_penalty_run():
    train_data, test_data = split(toy_classification(3000, seed=12), 0.25, seed=12)
    config = PreprocessorConfig(delta_x=0.3, lambda_f=10.0, epochs=60, batch_size=100, hidden_width=32,
                                dropout_rate=0.0, lr_h=5e-3, seed=4)
    return train(train_data, config), train_data, test_data


@pytest.mark.slow
def test_upstream_risk_is_no_worse_than_matched_loss_downstream_models(strong_penalty_run):
    pp, train_data, _ = strong_penalty_run
    train_t = pp.transform(train_data)
    upstream = prediction_loss(pp.upstream_scores(train_t.x), train_t.y, "classification")
    settings = DownstreamSettings(upstream_width=32, mlp_epochs=60, mlp_batch_size=100)
    zoo = fit_zoo(MODEL_KINDS, train_t.x, train_t.y, settings, seed=4)
    losses = {kind: prediction_loss(model.score(train_t.x), train_t.y, "classification") for kind, model in zoo.items()}
    for kind in ("logistic_regression", "small_mlp"):
        assert upstream <= losses[kind] + 0.02, kind
    spread = risk_spread(list(losses.values()))
    assert spread["variance"] <= spread["popoviciu_bound"]
    assert spread["range"] == pytest.approx(max(losses.values()) - min(losses.values()))


@pytest.mark.slow
def test_composed_model_parity_improves_on_transformed_data(strong_penalty_run):
    pp, train_data, test_data = strong_penalty_run
    rff = FeatureMap.random_fourier(train_data.x.shape[1], 200, bandwidth=1.0, seed=0)
    original = compose(rff, "logistic_regression", train_data.x, train_data.y)
    train_t = pp.transform(train_data)
    transformed = compose(rff, "logistic_regression", train_t.x, train_t.y)
    x_test = pp.transform_covariates(test_data.x, test_data.a)
    sp_original = evaluate_scores(original.score(test_data.x), test_data.y, test_data.groups).sp
    sp_transformed = evaluate_scores(transformed.score(x_test), test_data.y, test_data.groups).sp
    assert sp_original is not None and sp_transformed is not None
    assert sp_transformed <= sp_original
