from downstream.feature_map import FeatureMap
from downstream.models import (
    MODEL_KINDS,
    DownstreamModel,
    DownstreamSettings,
    compose,
    fit,
    fit_zoo,
    score,
)
