"""Predict whether an Amazon review will ever receive a helpful vote."""

from .errors import HelpvoteError
from .features import FeatureMatrix, FeatureSpec, build_features
from .ingest import Dataset, IngestFilter, RawReview, generate_synthetic, load_dataset
from .models import Model, ModelConfig, init_model, predict
from .optim import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "FeatureMatrix",
    "FeatureSpec",
    "HelpvoteError",
    "IngestFilter",
    "Model",
    "ModelConfig",
    "RawReview",
    "TrainConfig",
    "build_features",
    "generate_synthetic",
    "init_model",
    "load_dataset",
    "predict",
    "train",
]
