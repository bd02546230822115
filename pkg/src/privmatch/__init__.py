"""Obfuscated-image matching toolkit.

Three image encoders (tile-wise chaotic scrambling, full-frame chaotic
scrambling, BFV homomorphic encryption), pair-corpus construction with
augmentation, and the scoring/submission machinery that evaluates
detectors over all three.
"""

from .augment import AugmentConfig, SixChannelSample, apply_augmentations, make_sample
from .bfv import BfvCiphertext, BfvParams, KeyTriple
from .catmap import CatMapKey, cat_map_forward, cat_map_inverse, period
from .dataset import PairManifest, PairRecord, build_corpus
from .errors import (
    DimensionError,
    FormatError,
    PeriodLimitError,
    PrivmatchError,
    ValidationError,
)
from .evalkit import ScoreMatrix, Weights, accuracy, ensemble, weighted_accuracy

__version__ = "0.1.0"

__all__ = [
    "AugmentConfig",
    "BfvCiphertext",
    "BfvParams",
    "CatMapKey",
    "DimensionError",
    "FormatError",
    "KeyTriple",
    "PairManifest",
    "PairRecord",
    "PeriodLimitError",
    "PrivmatchError",
    "ScoreMatrix",
    "SixChannelSample",
    "ValidationError",
    "Weights",
    "accuracy",
    "apply_augmentations",
    "build_corpus",
    "cat_map_forward",
    "cat_map_inverse",
    "ensemble",
    "make_sample",
    "period",
    "weighted_accuracy",
]
