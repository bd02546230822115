"""Image geometry and scrambling pipelines.

Images are numpy uint8 arrays of shape (height, width, 3), row-major.
Scrambling moves whole pixels, so all three channels share one
permutation per tile (or per frame). Resampling is fixed: bilinear for
downscale, nearest for upscale, so outputs are bit-reproducible.
"""

from __future__ import annotations

import hashlib

import numpy as np
from PIL import Image

from .catmap import CatMapKey, grid_permutation
from .errors import DimensionError, ValidationError

DEFAULT_SIDE = 512
DEFAULT_TILE = 32
FACE_SIDE = 52
DEFAULT_MAX_ASPECT = 4 / 3


def require_rgb8(img: np.ndarray) -> np.ndarray:
    if not isinstance(img, np.ndarray) or img.dtype != np.uint8:
        raise ValidationError("image must be a uint8 numpy array")
    if img.ndim != 3 or img.shape[2] != 3:
        raise DimensionError(f"image must be HxWx3, got shape {img.shape}")
    if img.shape[0] == 0 or img.shape[1] == 0:
        raise DimensionError("image has a zero-sized axis")
    return img


def load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_image(img: np.ndarray, path) -> None:
    require_rgb8(img)
    Image.fromarray(img).save(path)


def resize(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """Resize with the fixed filter policy (bilinear down, nearest up)."""
    require_rgb8(img)
    h, w = img.shape[:2]
    if (w, h) == (width, height):
        return img.copy()
    if width <= w and height <= h:
        filt = Image.BILINEAR
    else:
        filt = Image.NEAREST
    out = Image.fromarray(img).resize((width, height), filt)
    return np.asarray(out, dtype=np.uint8)


def normalize_geometry(
    img: np.ndarray,
    side: int = DEFAULT_SIDE,
    max_aspect: float = DEFAULT_MAX_ASPECT,
) -> np.ndarray:
    """Square an image: bounded center-crop, symmetric zero-pad, scale.

    The long axis is center-cropped until long/short <= max_aspect, the
    short axis is zero-padded to square, then the result is scaled to
    side x side. Conforming side x side inputs pass through unchanged.
    """
    require_rgb8(img)
    if side < 1:
        raise DimensionError(f"side must be positive, got {side}")
    h, w = img.shape[:2]

    limit = int(min(h, w) * max_aspect)
    if max(h, w) > limit:
        if h >= w:
            top = (h - limit) // 2
            img = img[top : top + limit]
        else:
            left = (w - limit) // 2
            img = img[:, left : left + limit]
        h, w = img.shape[:2]

    if h != w:
        size = max(h, w)
        padded = np.zeros((size, size, 3), dtype=np.uint8)
        top = (size - h) // 2
        left = (size - w) // 2
        padded[top : top + h, left : left + w] = img
        img = padded

    return resize(img, side, side)


def _derive_tile_iterations(key: CatMapKey, seed: int, row: int, col: int) -> int:
    digest = hashlib.sha256(
        f"tile:{seed}:{row}:{col}:{key.grid_size}".encode()
    ).digest()
    span = 3 * key.grid_size
    return 1 + int.from_bytes(digest[:8], "little") % span


def _scramble(block: np.ndarray, perm: np.ndarray) -> np.ndarray:
    flat = block.reshape(-1, 3)
    out = np.empty_like(flat)
    out[perm] = flat
    return out.reshape(block.shape)


def encode_tiled(
    img: np.ndarray,
    key: CatMapKey,
    tile_size: int = DEFAULT_TILE,
    per_tile_seed: int | None = None,
    inverse: bool = False,
) -> np.ndarray:
    """Scramble each tile_size x tile_size tile independently, in place.

    All tiles share the key's permutation unless per_tile_seed is given,
    in which case each tile's iteration count is derived by hashing
    (seed, tile row, tile col). Pass inverse=True to decode.
    """
    require_rgb8(img)
    h, w = img.shape[:2]
    if key.grid_size != tile_size:
        raise DimensionError(
            f"key grid_size {key.grid_size} != tile size {tile_size}"
        )
    if h % tile_size or w % tile_size:
        raise DimensionError(
            f"image {w}x{h} is not divisible into {tile_size}x{tile_size} tiles"
        )

    perm_cache: dict[int, np.ndarray] = {}

    def perm_for(k: int) -> np.ndarray:
        if k not in perm_cache:
            perm_cache[k] = grid_permutation(key.with_iterations(k), inverse=inverse)
        return perm_cache[k]

    out = np.empty_like(img)
    for row in range(h // tile_size):
        for col in range(w // tile_size):
            k = key.iterations
            if per_tile_seed is not None:
                k = _derive_tile_iterations(key, per_tile_seed, row, col)
            ys = slice(row * tile_size, (row + 1) * tile_size)
            xs = slice(col * tile_size, (col + 1) * tile_size)
            out[ys, xs] = _scramble(img[ys, xs], perm_for(k))
    return out


def decode_tiled(
    img: np.ndarray,
    key: CatMapKey,
    tile_size: int = DEFAULT_TILE,
    per_tile_seed: int | None = None,
) -> np.ndarray:
    return encode_tiled(img, key, tile_size, per_tile_seed, inverse=True)


def encode_fullframe(img: np.ndarray, key: CatMapKey, inverse: bool = False) -> np.ndarray:
    """Scramble the whole frame with one global permutation."""
    require_rgb8(img)
    h, w = img.shape[:2]
    if h != w:
        raise DimensionError(f"full-frame scrambling needs a square image, got {w}x{h}")
    if key.grid_size != h:
        raise DimensionError(f"key grid_size {key.grid_size} != image side {h}")
    perm = grid_permutation(key, inverse=inverse)
    return _scramble(img, perm)


def decode_fullframe(img: np.ndarray, key: CatMapKey) -> np.ndarray:
    return encode_fullframe(img, key, inverse=True)


def prepare_face_crop(
    img: np.ndarray,
    crop_box: tuple[int, int, int, int],
    side: int = FACE_SIDE,
) -> np.ndarray:
    """Crop a square region (left, top, width, height) and scale to side."""
    require_rgb8(img)
    left, top, width, height = crop_box
    if width != height:
        raise DimensionError(f"crop box must be square, got {width}x{height}")
    if width < 1:
        raise DimensionError("crop box must be non-empty")
    h, w = img.shape[:2]
    if left < 0 or top < 0 or left + width > w or top + height > h:
        raise DimensionError(
            f"crop box {crop_box} exceeds image bounds {w}x{h}"
        )
    return resize(img[top : top + height, left : left + width], side, side)


def center_crop_box(img: np.ndarray, fraction: float = 1.0) -> tuple[int, int, int, int]:
    """Largest centered square box scaled by `fraction`."""
    h, w = img.shape[:2]
    size = max(1, int(min(h, w) * fraction))
    return ((w - size) // 2, (h - size) // 2, size, size)


def tile_histograms(img: np.ndarray, tile_size: int = DEFAULT_TILE) -> np.ndarray:
    """Per-tile, per-channel value histograms, shape (rows, cols, 3, 256)."""
    require_rgb8(img)
    h, w = img.shape[:2]
    if h % tile_size or w % tile_size:
        raise DimensionError("image side not divisible by tile size")
    rows, cols = h // tile_size, w // tile_size
    out = np.zeros((rows, cols, 3, 256), dtype=np.int64)
    for r in range(rows):
        for c in range(cols):
            tile = img[r * tile_size : (r + 1) * tile_size, c * tile_size : (c + 1) * tile_size]
            for ch in range(3):
                out[r, c, ch] = np.bincount(tile[:, :, ch].ravel(), minlength=256)
    return out
