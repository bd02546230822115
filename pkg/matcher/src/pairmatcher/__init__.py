"""Small CNN pair-matchers for six-channel image-pair tensors."""

from .model import ARCHITECTURES, IN_CHANNELS, build_model
from .sampleio import Sample, load_split, read_manifest_labels, read_sample
from .train import ReportRow, TrainSpec, evaluate_scores, predict, run_training, train

__version__ = "0.1.0"

__all__ = [
    "ARCHITECTURES",
    "IN_CHANNELS",
    "ReportRow",
    "Sample",
    "TrainSpec",
    "build_model",
    "evaluate_scores",
    "load_split",
    "predict",
    "read_manifest_labels",
    "read_sample",
    "run_training",
    "train",
]
