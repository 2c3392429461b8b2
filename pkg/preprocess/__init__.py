from preprocess.config import PreprocessorConfig
from preprocess.constraints import (
    ConstraintSpec,
    constraint_loss,
    constraint_loss_and_gradient,
    covariate_distances,
    outcome_block,
)
from preprocess.converters import CovariateConverter, OutcomeConverter
from preprocess.upstream import UpstreamModel, fit_joint_risk_model, fit_plain_upstream, fit_supervised
from preprocess.trainer import (
    ConstraintMeasurement,
    IdentityPreprocessor,
    TrainedPreprocessor,
    TrainingTrace,
    measure_constraints,
    train,
    transform_covariates,
    transform_outcome,
)
