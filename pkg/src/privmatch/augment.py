"""Stochastic image augmentation and six-channel sample assembly.

Nine augmentation primitives operate on 8-bit images before any
normalization; each fires independently with probability p and they are
always applied in OP_ORDER. Every op keeps the input dimensions
(shift-scale-rotate exposes zero-filled regions). All randomness flows
from explicit seeds.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import DimensionError, FormatError, ValidationError
from .imaging import require_rgb8

OP_ORDER = (
    "shift_scale_rotate",
    "horizontal_flip",
    "random_brightness_contrast",
    "motion_blur",
    "gauss_noise",
    "to_gray",
    "image_compression",
    "multiplicative_noise",
    "coarse_dropout",
)
SEVEN_OPS = OP_ORDER[:7]
NINE_OPS = OP_ORDER

APPROACHES = ("S12", "T1", "T2", "T3")

_SAMPLE_MAGIC = b"SIX1"
_SAMPLE_HEADER = struct.Struct("<4sIIIIIq")  # magic, h, w, c, dtype, label, pair_id
_DTYPE_F32 = 1


@dataclass(frozen=True)
class AugmentConfig:
    """Per-op firing probability and parameter ranges."""

    p: float = 0.1
    shift_limit: float = 0.0625
    scale_range: tuple[float, float] = (0.9, 1.1)
    rotate_limit: float = 45.0
    brightness_limit: float = 0.2
    contrast_limit: float = 0.2
    blur_sizes: tuple[int, ...] = (3, 5, 7)
    noise_sigma_range: tuple[float, float] = (math.sqrt(10.0), math.sqrt(50.0))
    jpeg_quality_range: tuple[int, int] = (60, 100)
    multiplier_range: tuple[float, float] = (0.9, 1.1)
    dropout_max_holes: int = 8
    dropout_max_size: int = 8

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError(f"probability must lie in [0, 1], got {self.p}")
        if self.dropout_max_holes < 1 or self.dropout_max_size < 1:
            raise ValidationError("dropout limits must be >= 1")
        if any(k < 1 or k % 2 == 0 for k in self.blur_sizes):
            raise ValidationError("blur kernel sizes must be odd and positive")


# -- individual ops (pure given explicit parameters) -------------------------

def shift_scale_rotate(img, shift_x: float, shift_y: float, scale: float, angle: float):
    """Affine warp; exposed border regions are zero-filled."""
    require_rgb8(img)
    h, w = img.shape[:2]
    theta = math.radians(angle)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    # inverse map for PIL: output (x, y) -> input coordinates
    inv_scale = 1.0 / scale
    cos_t, sin_t = math.cos(-theta), math.sin(-theta)
    a = cos_t * inv_scale
    b = -sin_t * inv_scale
    d = sin_t * inv_scale
    e = cos_t * inv_scale
    tx = shift_x * w
    ty = shift_y * h
    c = cx - a * (cx + tx) - b * (cy + ty)
    f = cy - d * (cx + tx) - e * (cy + ty)
    out = Image.fromarray(img).transform(
        (w, h), Image.AFFINE, (a, b, c, d, e, f), resample=Image.BILINEAR, fillcolor=(0, 0, 0)
    )
    return np.asarray(out, dtype=np.uint8)


def horizontal_flip(img):
    """Mirror columns: pixel (x, y) moves to (W-1-x, y)."""
    require_rgb8(img)
    return img[:, ::-1].copy()


def random_brightness_contrast(img, brightness: float, contrast: float):
    x = img.astype(np.float64) / 255.0
    x = (x - 0.5) * (1.0 + contrast) + 0.5 + brightness
    return np.clip(np.rint(x * 255.0), 0, 255).astype(np.uint8)


def motion_blur(img, kernel_size: int, direction: int):
    """Line blur along one of four directions (0:h, 1:v, 2:diag, 3:anti)."""
    k = np.zeros((kernel_size, kernel_size), dtype=np.float64)
    mid = kernel_size // 2
    if direction == 0:
        k[mid, :] = 1.0
    elif direction == 1:
        k[:, mid] = 1.0
    elif direction == 2:
        np.fill_diagonal(k, 1.0)
    else:
        np.fill_diagonal(np.fliplr(k), 1.0)
    k /= k.sum()
    out = np.empty_like(img, dtype=np.float64)
    for ch in range(3):
        out[:, :, ch] = ndimage.convolve(img[:, :, ch].astype(np.float64), k, mode="reflect")
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def gauss_noise(img, sigma: float, noise_seed: int):
    rng = np.random.default_rng(noise_seed)
    noisy = img.astype(np.float64) + rng.normal(0.0, sigma, img.shape)
    return np.clip(np.rint(noisy), 0, 255).astype(np.uint8)


def to_gray(img):
    """Luma 0.299/0.587/0.114, rounded, replicated to all channels."""
    luma = (
        0.299 * img[:, :, 0].astype(np.float64)
        + 0.587 * img[:, :, 1].astype(np.float64)
        + 0.114 * img[:, :, 2].astype(np.float64)
    )
    gray = np.clip(np.rint(luma), 0, 255).astype(np.uint8)
    return np.stack([gray, gray, gray], axis=2)


def image_compression(img, quality: int):
    """JPEG encode/decode round trip at the sampled quality."""
    buf = io.BytesIO()
    Image.fromarray(img).save(buf, format="JPEG", quality=int(quality))
    buf.seek(0)
    with Image.open(buf) as decoded:
        return np.asarray(decoded.convert("RGB"), dtype=np.uint8)


def multiplicative_noise(img, factor: float):
    return np.clip(np.rint(img.astype(np.float64) * factor), 0, 255).astype(np.uint8)


def coarse_dropout(img, holes: tuple[tuple[int, int, int, int], ...]):
    """Zero out rectangles given as (left, top, width, height)."""
    out = img.copy()
    for left, top, width, height in holes:
        out[top : top + height, left : left + width] = 0
    return out


# -- plan sampling and application -------------------------------------------

def sample_plan(cfg: AugmentConfig, rng: np.random.Generator, ops=SEVEN_OPS, shape=None):
    """Draw (op, fired, params) for each active op, in application order.

    One uniform draw decides each op's firing, so firing statistics are
    independent of parameter sampling.
    """
    plan = []
    for name in OP_ORDER:
        if name not in ops:
            continue
        fired = bool(rng.uniform() < cfg.p)
        params = {}
        if fired:
            params = _sample_params(name, cfg, rng, shape)
        plan.append((name, fired, params))
    return plan


def _sample_params(name, cfg, rng, shape):
    if name == "shift_scale_rotate":
        return {
            "shift_x": rng.uniform(-cfg.shift_limit, cfg.shift_limit),
            "shift_y": rng.uniform(-cfg.shift_limit, cfg.shift_limit),
            "scale": rng.uniform(*cfg.scale_range),
            "angle": rng.uniform(-cfg.rotate_limit, cfg.rotate_limit),
        }
    if name == "random_brightness_contrast":
        return {
            "brightness": rng.uniform(-cfg.brightness_limit, cfg.brightness_limit),
            "contrast": rng.uniform(-cfg.contrast_limit, cfg.contrast_limit),
        }
    if name == "motion_blur":
        return {
            "kernel_size": int(rng.choice(cfg.blur_sizes)),
            "direction": int(rng.integers(0, 4)),
        }
    if name == "gauss_noise":
        return {
            "sigma": rng.uniform(*cfg.noise_sigma_range),
            "noise_seed": int(rng.integers(0, 2**63)),
        }
    if name == "image_compression":
        return {"quality": int(rng.integers(cfg.jpeg_quality_range[0], cfg.jpeg_quality_range[1] + 1))}
    if name == "multiplicative_noise":
        return {"factor": rng.uniform(*cfg.multiplier_range)}
    if name == "coarse_dropout":
        if shape is None:
            raise ValidationError("coarse_dropout needs the image shape to plan holes")
        h, w = shape[:2]
        count = int(rng.integers(1, cfg.dropout_max_holes + 1))
        holes = []
        for _ in range(count):
            hw = int(rng.integers(1, cfg.dropout_max_size + 1))
            hh = int(rng.integers(1, cfg.dropout_max_size + 1))
            left = int(rng.integers(0, max(1, w - hw + 1)))
            top = int(rng.integers(0, max(1, h - hh + 1)))
            holes.append((left, top, hw, hh))
        return {"holes": tuple(holes)}
    return {}


_OP_FUNCS = {
    "shift_scale_rotate": shift_scale_rotate,
    "horizontal_flip": horizontal_flip,
    "random_brightness_contrast": random_brightness_contrast,
    "motion_blur": motion_blur,
    "gauss_noise": gauss_noise,
    "to_gray": to_gray,
    "image_compression": image_compression,
    "multiplicative_noise": multiplicative_noise,
    "coarse_dropout": coarse_dropout,
}


def apply_plan(img: np.ndarray, plan) -> np.ndarray:
    out = img
    for name, fired, params in plan:
        if fired:
            out = _OP_FUNCS[name](out, **params)
    return out


def apply_augmentations(img: np.ndarray, cfg: AugmentConfig, seed, ops=SEVEN_OPS) -> np.ndarray:
    """Apply the active op subset with per-op probability cfg.p."""
    require_rgb8(img)
    rng = np.random.default_rng(seed)
    plan = sample_plan(cfg, rng, ops=ops, shape=img.shape)
    return apply_plan(img, plan)


# -- normalization and sample assembly ---------------------------------------

def normalize(img: np.ndarray, mean: float = 0.5, std: float = 0.5) -> np.ndarray:
    """(x/255 - mean)/std per channel; defaults map bytes onto [-1, 1]."""
    require_rgb8(img)
    return ((img.astype(np.float32) / 255.0) - mean) / std


def scale_only(img: np.ndarray) -> np.ndarray:
    """x/255, range [0, 1]."""
    require_rgb8(img)
    return img.astype(np.float32) / 255.0


@dataclass(frozen=True)
class SixChannelSample:
    """Stacked detector input: channels 0-2 original, 3-5 encoded."""

    tensor: np.ndarray
    label: int
    pair_id: int

    def __post_init__(self):
        if self.tensor.ndim != 3 or self.tensor.shape[2] != 6:
            raise DimensionError(f"sample tensor must be HxWx6, got {self.tensor.shape}")
        if self.label not in (0, 1):
            raise ValidationError(f"label must be 0 or 1, got {self.label}")


def make_sample(
    original: np.ndarray,
    encoded,
    approach: str,
    cfg: AugmentConfig,
    seed,
    label: int = 1,
    pair_id: int = 0,
) -> SixChannelSample:
    """Assemble one six-channel sample under the chosen recipe.

    S12: augment both halves (7 ops), normalize both.
    T1:  augment + normalize the original; encoded is divided by 255 only.
    T2:  divide both halves by 255, no augmentation.
    T3:  augment both halves (9 ops), normalize both.
    A bytes `encoded` is first rendered via the ciphertext byte view at
    the original's dimensions.
    """
    if approach not in APPROACHES:
        raise ValidationError(f"approach must be one of {APPROACHES}, got {approach!r}")
    require_rgb8(original)
    if isinstance(encoded, (bytes, bytearray)):
        from .bfv import ciphertext_to_image

        h, w = original.shape[:2]
        encoded = ciphertext_to_image(bytes(encoded), target=(w, h))
    require_rgb8(encoded)
    if encoded.shape != original.shape:
        raise DimensionError(
            f"encoded shape {encoded.shape} != original shape {original.shape}"
        )

    seq = np.random.SeedSequence(seed)
    rng_orig, rng_enc = (np.random.default_rng(s) for s in seq.spawn(2))

    if approach == "S12":
        left = normalize(apply_augmentations(original, cfg, rng_orig, SEVEN_OPS))
        right = normalize(apply_augmentations(encoded, cfg, rng_enc, SEVEN_OPS))
    elif approach == "T1":
        left = normalize(apply_augmentations(original, cfg, rng_orig, SEVEN_OPS))
        right = scale_only(encoded)
    elif approach == "T2":
        left = scale_only(original)
        right = scale_only(encoded)
    else:  # T3
        left = normalize(apply_augmentations(original, cfg, rng_orig, NINE_OPS))
        right = normalize(apply_augmentations(encoded, cfg, rng_enc, NINE_OPS))

    return SixChannelSample(
        tensor=np.concatenate([left, right], axis=2), label=label, pair_id=pair_id
    )


# -- sample tensor serialization ---------------------------------------------

def write_sample(path, sample: SixChannelSample) -> None:
    tensor = np.ascontiguousarray(sample.tensor, dtype=np.float32)
    h, w, c = tensor.shape
    header = _SAMPLE_HEADER.pack(_SAMPLE_MAGIC, h, w, c, _DTYPE_F32, sample.label, sample.pair_id)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(tensor.astype("<f4").tobytes())


def read_sample(path) -> SixChannelSample:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _SAMPLE_HEADER.size:
        raise FormatError("sample file shorter than header")
    magic, h, w, c, dtype, label, pair_id = _SAMPLE_HEADER.unpack_from(blob)
    if magic != _SAMPLE_MAGIC:
        raise FormatError(f"bad sample magic {magic!r}")
    if dtype != _DTYPE_F32:
        raise FormatError(f"unsupported sample dtype code {dtype}")
    need = _SAMPLE_HEADER.size + h * w * c * 4
    if len(blob) != need:
        raise FormatError(f"sample file length {len(blob)} != expected {need}")
    tensor = np.frombuffer(blob, dtype="<f4", offset=_SAMPLE_HEADER.size).reshape(h, w, c)
    return SixChannelSample(tensor=tensor.astype(np.float32), label=label, pair_id=pair_id)
