"""Origin-destination flow models and their training protocols."""

from .baselines import ClassicGravity, LinearFlowRegression, classic_gravity_fit, linear_regression_fit
from .features import FEATURE_NAMES, FeatureScaler, FlowSample, assemble_samples, scale_features
from .models import (
    ModelConfig,
    count_parameters,
    deep_gravity_dims,
    flows_from_scores,
    forward,
    forward_deep_gravity,
    forward_transformer_gravity,
    init_params,
    sample_loss,
)
from .training import FitResult, OptimConfig, TrainResult, cv_folds, fit_model, train
