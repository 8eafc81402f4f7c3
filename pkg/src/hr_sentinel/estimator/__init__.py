"""Measurement error estimator: the CNN regressor and its training and storage."""

from hr_sentinel.estimator.adam import AdamState, adam_step
from hr_sentinel.estimator.checkpoint import CheckpointError, load_model, save_model
from hr_sentinel.estimator.network import (
    EstimatorConfig,
    EstimatorModel,
    backward,
    batch_loss,
    forward,
    init_model,
    loss,
)
from hr_sentinel.estimator.train import (
    GridSearchResult,
    TrainingLog,
    fit,
    grid_search,
    train,
)

__all__ = [
    "AdamState",
    "CheckpointError",
    "EstimatorConfig",
    "EstimatorModel",
    "GridSearchResult",
    "TrainingLog",
    "adam_step",
    "backward",
    "batch_loss",
    "fit",
    "forward",
    "grid_search",
    "init_model",
    "load_model",
    "loss",
    "save_model",
    "train",
]
