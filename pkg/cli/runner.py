"""
cli/runner.py
Building blocks shared by the commands: data loading, zoo evaluation and the
per-budget experiment run.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from data.dataset import Dataset, load_csv, split
from data.synthetic import toy_classification, toy_regression, toy_regression_split
from downstream.models import fit_zoo
from metrics.diagnostics import UPSTREAM, HgrEvidence, ImprovementDiagnostics, improvement_diagnostics
from metrics.fairness import group_labels
from metrics.report import FairnessReport, evaluate_scores
from preprocess.config import PreprocessorConfig
from preprocess.trainer import IdentityPreprocessor, TrainedPreprocessor, measure_constraints, train
from preprocess.upstream import UpstreamModel, fit_joint_risk_model, fit_plain_upstream
from cli.experiment_config import DatasetSpec, ExperimentConfig
from utils.logger import get_logger

logger = get_logger(__name__)


def load_experiment_data(spec: DatasetSpec, run: int = 0) -> Tuple[Dataset, Dataset]:
    """(train, test) for run ``run``; synthetic sources draw fresh samples per run."""
    seed = spec.seed + run
    if spec.source == "toy_regression":
        if spec.n is None:
            return toy_regression_split(seed)
        return split(toy_regression(spec.n, seed), spec.test_fraction, seed)
    if spec.source in ("toy_classification", "toy_classification_hard"):
        n = spec.n if spec.n is not None else 5000
        full = toy_classification(n, seed, hard=spec.source.endswith("_hard"))
        return split(full, spec.test_fraction, seed)
    train_data = load_csv(spec.path, spec.schema_path)
    if spec.test_path:
        return train_data, load_csv(spec.test_path, spec.schema_path, fitted_schema=train_data.schema)
    return split(train_data, spec.test_fraction, seed)


@dataclass
class RunResult:
    """Reports of one preprocessor (or the identity) on one run."""

    reports: Dict[str, FairnessReport]
    scores: Dict[str, np.ndarray] = field(default_factory=dict)
    constraints: Optional[dict] = None
    diagnostics: Optional[ImprovementDiagnostics] = None


def evaluate_models(
    pp,
    train_data: Dataset,
    test_data: Dataset,
    config: ExperimentConfig,
    seed: int,
    upstream: Optional[UpstreamModel] = None,
) -> RunResult:
    """Fit the zoo on the transformed training split and score the transformed test split.

    Scores are evaluated against the test labels Y'.  ``upstream`` scores X~'
    directly; a TrainedPreprocessor supplies its own h~ when it is omitted.
    """
    task = train_data.task
    train_t = pp.transform(train_data)
    x_test = pp.transform_covariates(test_data.x, test_data.a)
    groups = group_labels(test_data.a)

    scores = {}
    if upstream is None and isinstance(pp, TrainedPreprocessor):
        upstream = pp.h_up
    if upstream is not None:
        scores[UPSTREAM] = upstream.predict(x_test)
    zoo = fit_zoo(config.downstream, train_t.x, train_t.y, config.downstream_settings, seed, task)
    for kind, model in zoo.items():
        scores[kind] = model.score(x_test)

    reports = {
        name: evaluate_scores(s, test_data.y, groups, task, hgr_bins=config.hgr_bins) for name, s in scores.items()
    }
    constraints = None
    if isinstance(pp, TrainedPreprocessor):
        constraints = measure_constraints(pp, train_data).to_dict()
    return RunResult(reports=reports, scores=scores, constraints=constraints)


def evaluate_baseline(train_data: Dataset, test_data: Dataset, config: ExperimentConfig, seed: int) -> Tuple[RunResult, UpstreamModel]:
    """Original-data reports; the upstream entry is h* fitted on (X, Y)."""
    plain = fit_plain_upstream(train_data, config.preprocessor.replace(seed=seed))
    result = evaluate_models(IdentityPreprocessor(train_data.schema), train_data, test_data, config, seed, plain)
    return result, plain


def diagnose(
    pp: TrainedPreprocessor,
    baseline: RunResult,
    transformed: RunResult,
    test_data: Dataset,
    joint_risk: float,
    config: ExperimentConfig,
) -> ImprovementDiagnostics:
    y_tilde = pp.transform_outcome(test_data.x, test_data.a, test_data.y)
    x_test = pp.transform_covariates(test_data.x, test_data.a)
    downstream = {k: s for k, s in transformed.scores.items() if k != UPSTREAM}
    evidence = HgrEvidence.from_scores(
        y=test_data.y,
        y_tilde=y_tilde,
        groups=group_labels(test_data.a),
        upstream_original=baseline.scores[UPSTREAM],
        upstream_transformed=transformed.scores[UPSTREAM],
        downstream_transformed=downstream,
        joint_risk=joint_risk,
        risk_y_transformed=pp.h_up.risk(x_test, test_data.y),
        bins=config.hgr_bins,
    )
    return improvement_diagnostics(
        baseline.reports, transformed.reports, evidence, pp.config.lambda_f, slack=config.slack
    )


def joint_risk_estimate(train_data: Dataset, test_data: Dataset, config: PreprocessorConfig) -> float:
    model = fit_joint_risk_model(train_data, config)
    return model.risk(np.hstack([test_data.x, test_data.a]), test_data.y)


def run_budgets(
    config: ExperimentConfig,
    run: int,
) -> Tuple[RunResult, List[Tuple[dict, TrainedPreprocessor, RunResult]]]:
    """Baseline plus one trained preprocessor per sweep budget, all on the data of run ``run``."""
    seed = config.preprocessor.seed + run
    train_data, test_data = load_experiment_data(config.dataset, run)
    baseline, _ = evaluate_baseline(train_data, test_data, config, seed)
    joint_risk = None
    if config.diagnostics:
        joint_risk = joint_risk_estimate(train_data, test_data, config.preprocessor.replace(seed=seed))

    outcomes = []
    for i, budget in enumerate(config.sweep.budgets()):
        logger.info(f"run {run}, budget {i + 1}: {budget}")
        pp_config = config.preprocessor.replace(seed=seed, **budget)
        pp = train(train_data, pp_config)
        result = evaluate_models(pp, train_data, test_data, config, seed)
        if config.diagnostics:
            result.diagnostics = diagnose(pp, baseline, result, test_data, joint_risk, config)
        outcomes.append((budget, pp, result))
    return baseline, outcomes
