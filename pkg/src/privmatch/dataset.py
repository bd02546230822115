"""Pair-dataset construction: encoders, non-match sampling, splits, manifests.

A corpus lives under `<root>/<subtask>/{originals,encoded}/` with a
`manifest.csv` ledger. Every randomized step derives its seed from the
master seed and a stable token, so regeneration is byte-identical and
order-independent.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import augment, bfv, imaging
from .catmap import CatMapKey
from .errors import ValidationError

MANIFEST_NAME = "manifest.csv"
MANIFEST_FIELDS = ("pair_id", "subtask", "original_path", "encoded_path", "label", "split")

LABEL_MATCH = 1
LABEL_NONMATCH = 0
SPLITS = ("train", "valid")


def derive_seed(master_seed: int, *tokens) -> int:
    """Stable 63-bit child seed from the master seed and context tokens."""
    text = ":".join([str(master_seed), *map(str, tokens)])
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


@dataclass(frozen=True)
class PairRecord:
    pair_id: int
    subtask: int
    original_path: str
    encoded_path: str
    label: int
    split: str = "train"


@dataclass
class PairManifest:
    records: list[PairRecord] = field(default_factory=list)
    master_seed: int = 0

    def counts(self) -> dict[tuple[int, str], int]:
        out: dict[tuple[int, str], int] = {}
        for rec in self.records:
            key = (rec.label, rec.split)
            out[key] = out.get(key, 0) + 1
        return out

    def by_split(self, split: str) -> list[PairRecord]:
        return [r for r in self.records if r.split == split]


def write_manifest(manifest: PairManifest, path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MANIFEST_FIELDS)
    for rec in manifest.records:
        writer.writerow(
            [rec.pair_id, rec.subtask, rec.original_path, rec.encoded_path, rec.label, rec.split]
        )
    Path(path).write_text(buf.getvalue())


def read_manifest(path, master_seed: int = 0) -> PairManifest:
    text = Path(path).read_text()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != MANIFEST_FIELDS:
        raise ValidationError(f"manifest header must be {','.join(MANIFEST_FIELDS)}")
    records = []
    for row in rows[1:]:
        if len(row) != len(MANIFEST_FIELDS):
            raise ValidationError(f"bad manifest row: {row!r}")
        pair_id, subtask, orig, enc, label, split = row
        if split not in SPLITS:
            raise ValidationError(f"bad split {split!r}")
        records.append(
            PairRecord(int(pair_id), int(subtask), orig, enc, int(label), split)
        )
    return PairManifest(records=records, master_seed=master_seed)


# -- synthetic originals ------------------------------------------------------

def synth_original(seed: int, side: int = imaging.DEFAULT_SIDE) -> np.ndarray:
    """Procedural texture: gradient background, random shapes, noise."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64) / max(side - 1, 1)
    img = np.zeros((side, side, 3), dtype=np.float64)
    for ch in range(3):
        gx, gy = rng.uniform(-1, 1, 2)
        base = rng.uniform(0.15, 0.85)
        img[:, :, ch] = base + 0.35 * (gx * xx + gy * yy)

    for _ in range(int(rng.integers(3, 8))):
        color = rng.uniform(0, 1, 3)
        cx, cy = rng.uniform(0.1, 0.9, 2) * side
        if rng.uniform() < 0.5:
            radius = rng.uniform(0.05, 0.25) * side
            mask = (np.mgrid[0:side, 0:side][1] - cx) ** 2 + (
                np.mgrid[0:side, 0:side][0] - cy
            ) ** 2 <= radius**2
        else:
            hw = rng.uniform(0.05, 0.25) * side
            hh = rng.uniform(0.05, 0.25) * side
            ys, xs = np.mgrid[0:side, 0:side]
            mask = (np.abs(xs - cx) <= hw) & (np.abs(ys - cy) <= hh)
        img[mask] = color

    img += rng.normal(0.0, 0.03, img.shape)
    return np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)


# -- encoders ------------------------------------------------------------------

@dataclass(frozen=True)
class EncoderConfig:
    """Per-subtask encoding parameters; BFV keys are loaded separately."""

    subtask: int
    cat_key: CatMapKey | None = None
    tile_size: int = imaging.DEFAULT_TILE
    side: int = imaging.DEFAULT_SIDE
    face_side: int = imaging.FACE_SIDE
    per_tile_seed: int | None = None
    bfv_params: bfv.BfvParams | None = None

    def __post_init__(self):
        if self.subtask not in (1, 2, 3):
            raise ValidationError(f"subtask must be 1, 2 or 3, got {self.subtask}")
        if self.subtask in (1, 2) and self.cat_key is None:
            raise ValidationError("subtasks 1 and 2 need a cat map key")


def derive_cat_key(seed: int, grid_size: int) -> CatMapKey:
    """Deterministic scrambling key for pipelines given only a seed."""
    a = 1 + derive_seed(seed, "cat-a", grid_size) % (grid_size - 1)
    b = 1 + derive_seed(seed, "cat-b", grid_size) % (grid_size - 1)
    k = 1 + derive_seed(seed, "cat-k", grid_size) % (2 * grid_size)
    return CatMapKey(grid_size=grid_size, a=a, b=b, iterations=k)


def default_encoder_config(subtask: int, seed: int) -> EncoderConfig:
    if subtask == 1:
        return EncoderConfig(subtask=1, cat_key=derive_cat_key(seed, imaging.DEFAULT_TILE))
    if subtask == 2:
        return EncoderConfig(
            subtask=2,
            cat_key=derive_cat_key(seed, imaging.DEFAULT_SIDE),
            side=imaging.DEFAULT_SIDE,
        )
    return EncoderConfig(subtask=3, bfv_params=bfv.BfvParams())


def encode_original(
    img: np.ndarray,
    config: EncoderConfig,
    bfv_keys: bfv.KeyTriple | None = None,
    seed: int = 0,
):
    """Run one subtask encoder; returns a uint8 image or a ciphertext blob."""
    if config.subtask == 1:
        squared = imaging.normalize_geometry(img, config.side)
        return imaging.encode_tiled(
            squared, config.cat_key, config.tile_size, config.per_tile_seed
        )
    if config.subtask == 2:
        squared = imaging.normalize_geometry(img, config.side)
        return imaging.encode_fullframe(squared, config.cat_key)
    if bfv_keys is None:
        raise ValidationError("subtask 3 encoding needs BFV keys")
    crop = imaging.prepare_face_crop(img, imaging.center_crop_box(img), config.face_side)
    return bfv.encrypt_image(crop, bfv_keys, config.bfv_params, seed)


# -- pair construction ---------------------------------------------------------

def build_matching(
    original_paths: list[str],
    config: EncoderConfig,
    root,
    seed: int,
    bfv_keys: bfv.KeyTriple | None = None,
) -> PairManifest:
    """Encode every original and emit label=1 records."""
    root = Path(root)
    enc_dir = root / str(config.subtask) / "encoded"
    enc_dir.mkdir(parents=True, exist_ok=True)
    suffix = ".bin" if config.subtask == 3 else ".png"

    records = []
    for pair_id, orig_path in enumerate(original_paths):
        img = imaging.load_image(root / orig_path)
        item_seed = derive_seed(seed, "encode", config.subtask, pair_id)
        encoded = encode_original(img, config, bfv_keys, item_seed)
        enc_rel = f"{config.subtask}/encoded/{pair_id:05d}{suffix}"
        if config.subtask == 3:
            (root / enc_rel).write_bytes(encoded)
        else:
            imaging.save_image(encoded, root / enc_rel)
        records.append(
            PairRecord(pair_id, config.subtask, orig_path, enc_rel, LABEL_MATCH)
        )
    return PairManifest(records=records, master_seed=seed)


def build_nonmatching(
    matching: PairManifest, seed: int, derangement: bool = False
) -> PairManifest:
    """Pair each original with another original's encoding (label=0).

    Default sampling is uniform over the other originals' encodings, with
    replacement. With derangement=True every encoding is used exactly once.
    """
    match_records = [r for r in matching.records if r.label == LABEL_MATCH]
    count = len(match_records)
    if count < 2:
        raise ValidationError("non-matching pairs need at least 2 originals")

    encoded_by_idx = [r.encoded_path for r in match_records]
    next_id = max(r.pair_id for r in matching.records) + 1

    if derangement:
        rng = np.random.default_rng(derive_seed(seed, "derange"))
        while True:
            perm = rng.permutation(count)
            if not (perm == np.arange(count)).any():
                break
        choices = [int(perm[i]) for i in range(count)]
    else:
        choices = []
        for i in range(count):
            rng = np.random.default_rng(derive_seed(seed, "nonmatch", i))
            pick = int(rng.integers(0, count - 1))
            if pick >= i:
                pick += 1  # skip self
            choices.append(pick)

    records = []
    for i, rec in enumerate(match_records):
        records.append(
            PairRecord(
                pair_id=next_id + i,
                subtask=rec.subtask,
                original_path=rec.original_path,
                encoded_path=encoded_by_idx[choices[i]],
                label=LABEL_NONMATCH,
            )
        )
    return PairManifest(records=records, master_seed=seed)


def split_manifest(manifest: PairManifest, ratio: float = 0.8, seed: int = 0) -> PairManifest:
    """Stratified train/valid assignment: floor(ratio * class size) trains."""
    if not 0.0 <= ratio <= 1.0:
        raise ValidationError(f"split ratio must lie in [0, 1], got {ratio}")
    by_label: dict[int, list[PairRecord]] = {}
    for rec in manifest.records:
        by_label.setdefault(rec.label, []).append(rec)

    assigned: dict[int, str] = {}
    for label, group in sorted(by_label.items()):
        rng = np.random.default_rng(derive_seed(seed, "split", label))
        order = rng.permutation(len(group))
        n_train = int(ratio * len(group))
        for rank, idx in enumerate(order):
            assigned[group[idx].pair_id] = "train" if rank < n_train else "valid"

    records = [replace(rec, split=assigned[rec.pair_id]) for rec in manifest.records]
    return PairManifest(records=records, master_seed=manifest.master_seed)


def merge(*manifests: PairManifest, master_seed: int = 0) -> PairManifest:
    records = []
    for m in manifests:
        records.extend(m.records)
    return PairManifest(records=records, master_seed=master_seed)


# -- one-call corpus builder ---------------------------------------------------

def build_corpus(
    root,
    subtask: int,
    count: int,
    seed: int,
    config: EncoderConfig | None = None,
    ratio: float = 0.8,
    source_dir=None,
    derangement: bool = False,
) -> PairManifest:
    """Generate originals, encode, pair, split and write the manifest.

    Originals are synthesized procedurally unless source_dir provides
    image files (lexicographic order, first `count` used).
    """
    if count < 2:
        raise ValidationError("a corpus needs at least 2 originals")
    root = Path(root)
    config = config or default_encoder_config(subtask, seed)
    orig_dir = root / str(subtask) / "originals"
    orig_dir.mkdir(parents=True, exist_ok=True)

    side = config.face_side if subtask == 3 else config.side
    original_paths = []
    if source_dir is not None:
        files = sorted(
            p for p in Path(source_dir).iterdir() if p.suffix.lower() in (".png", ".ppm", ".jpg", ".jpeg")
        )[:count]
        if len(files) < count:
            raise ValidationError(f"source dir holds {len(files)} images, need {count}")
        for i, src in enumerate(files):
            img = imaging.normalize_geometry(imaging.load_image(src), side)
            rel = f"{subtask}/originals/{i:05d}.png"
            imaging.save_image(img, root / rel)
            original_paths.append(rel)
    else:
        for i in range(count):
            img = synth_original(derive_seed(seed, "synth", subtask, i), side)
            rel = f"{subtask}/originals/{i:05d}.png"
            imaging.save_image(img, root / rel)
            original_paths.append(rel)

    bfv_keys = None
    if subtask == 3:
        bfv_keys = bfv.keygen(config.bfv_params, derive_seed(seed, "bfv-keys"))
        bfv.save_keys(root / "3" / "keys.bfv", bfv_keys, config.bfv_params)

    matching = build_matching(original_paths, config, root, seed, bfv_keys)
    nonmatching = build_nonmatching(matching, seed, derangement)
    manifest = split_manifest(merge(matching, nonmatching, master_seed=seed), ratio, seed)
    write_manifest(manifest, root / str(subtask) / MANIFEST_NAME)
    return manifest


# -- sample emission ------------------------------------------------------------

def emit_samples(
    manifest: PairManifest,
    root,
    out_dir,
    approach: str,
    cfg: augment.AugmentConfig,
    seed: int,
) -> dict[str, int]:
    """Write one six-channel tensor file per record under out_dir/<split>/."""
    root = Path(root)
    out_dir = Path(out_dir)
    counts = {s: 0 for s in SPLITS}
    for split in SPLITS:
        (out_dir / split).mkdir(parents=True, exist_ok=True)
    for rec in manifest.records:
        original = imaging.load_image(root / rec.original_path)
        if rec.encoded_path.endswith(".bin"):
            encoded = (root / rec.encoded_path).read_bytes()
        else:
            encoded = imaging.load_image(root / rec.encoded_path)
        sample = augment.make_sample(
            original,
            encoded,
            approach,
            cfg,
            derive_seed(seed, "sample", rec.pair_id),
            label=rec.label,
            pair_id=rec.pair_id,
        )
        augment.write_sample(out_dir / rec.split / f"{rec.pair_id:06d}.bin", sample)
        counts[rec.split] += 1
    return counts
