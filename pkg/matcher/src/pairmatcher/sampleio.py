"""Readers for the corpus interchange formats.

Sample tensors arrive as flat binaries: a 28-byte header (magic "SIX1",
u32 height/width/channels/dtype-code/label, i64 pair id, little-endian)
followed by row-major float32 data. Manifests are CSV with columns
(pair_id, subtask, original_path, encoded_path, label, split).
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_HEADER = struct.Struct("<4sIIIIIq")
_MAGIC = b"SIX1"
_DTYPE_F32 = 1

MANIFEST_FIELDS = ("pair_id", "subtask", "original_path", "encoded_path", "label", "split")


class SampleFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Sample:
    tensor: np.ndarray  # (H, W, C) float32
    label: int
    pair_id: int


def read_sample(path) -> Sample:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise SampleFormatError(f"{path}: shorter than header")
    magic, h, w, c, dtype, label, pair_id = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise SampleFormatError(f"{path}: bad magic {magic!r}")
    if dtype != _DTYPE_F32:
        raise SampleFormatError(f"{path}: unsupported dtype code {dtype}")
    if len(blob) != _HEADER.size + h * w * c * 4:
        raise SampleFormatError(f"{path}: truncated payload")
    tensor = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(h, w, c)
    return Sample(tensor=tensor.astype(np.float32), label=int(label), pair_id=int(pair_id))


def load_split(samples_dir, split: str) -> list[Sample]:
    """All samples of one split, ordered by file name for determinism."""
    split_dir = Path(samples_dir) / split
    files = sorted(split_dir.glob("*.bin"))
    if not files:
        raise SampleFormatError(f"no sample files under {split_dir}")
    return [read_sample(p) for p in files]


def read_manifest_labels(path) -> dict[int, tuple[int, str]]:
    """pair_id -> (label, split) from a corpus manifest."""
    out: dict[int, tuple[int, str]] = {}
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != MANIFEST_FIELDS:
        raise SampleFormatError(f"{path}: unexpected manifest header {rows[:1]!r}")
    for row in rows[1:]:
        pair_id, _, _, _, label, split = row
        out[int(pair_id)] = (int(label), split)
    return out


def write_score_csv(path, model_id: str, scores: dict[int, float]) -> None:
    """Score file of (pair_id, model_id, score) rows, header included."""
    lines = ["pair_id,model_id,score"]
    for pair_id in sorted(scores):
        lines.append(f"{pair_id},{model_id},{scores[pair_id]!r}")
    Path(path).write_text("\n".join(lines) + "\n")
