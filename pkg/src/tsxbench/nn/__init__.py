"""Minimal neural-network stack: autodiff, classifiers, training, checkpoints."""
from .autodiff import Tensor, conv1d
from .checkpoint import load_model, save_model
from .models import (
    ARCHITECTURES,
    GatedRecurrentNet,
    LinearScorer,
    Model,
    TemporalConvNet,
    accuracy,
    build_model,
    forward,
    input_gradient,
    predict,
    predict_logits,
    predict_proba,
    readout,
)
from .training import TrainConfig, TrainingHistory, train

__all__ = [
    "ARCHITECTURES", "GatedRecurrentNet", "LinearScorer", "Model", "TemporalConvNet", "Tensor",
    "TrainConfig", "TrainingHistory", "accuracy", "build_model", "conv1d", "forward",
    "input_gradient", "load_model", "predict", "predict_logits", "predict_proba", "readout",
    "save_model", "train",
]
