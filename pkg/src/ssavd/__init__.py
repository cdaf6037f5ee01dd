"""Lightweight single-stream audio-visual deepfake detection."""

from .config import ModelConfig
from .estimator import DeepfakeDetector
from .metrics import MetricReport, accuracy, auc
from .model import SSAVDModel
from .objective import LossConfig
from .tensor import Tensor
from .trainer import ClipDataset, TrainPlan, evaluate, train

__all__ = [
    "ClipDataset",
    "DeepfakeDetector",
    "LossConfig",
    "MetricReport",
    "ModelConfig",
    "SSAVDModel",
    "Tensor",
    "TrainPlan",
    "accuracy",
    "auc",
    "evaluate",
    "train",
]

__version__ = "0.1.0"
