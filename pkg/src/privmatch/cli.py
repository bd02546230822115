"""Command line entry point wiring the pipelines together.

Exit codes: 0 ok, 2 usage, 3 I/O, 4 validation, 5 selftest failure.
Every randomized pipeline takes an explicit --seed; there is no
wall-clock default. A --config file of `key = value` lines supplies
defaults, and explicit flags win over it.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import augment, bfv, dataset, evalkit, imaging
from .catmap import CatMapKey, cat_map_forward, cat_map_inverse, grid_permutation, period
from .errors import PrivmatchError, ValidationError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_VALIDATION = 4
EXIT_SELFTEST = 5


class UsageError(Exception):
    pass


def _load_config(path) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _merge_config(args):
    if not getattr(args, "config", None):
        return
    overrides = _load_config(args.config)
    for key, text in overrides.items():
        if not hasattr(args, key):
            raise ValidationError(f"config key {key!r} unknown for this subcommand")
        if getattr(args, key) is None:
            current_type = _CONFIG_TYPES.get(key, str)
            setattr(args, key, current_type(text))


_CONFIG_TYPES = {
    "seed": int,
    "subtask": int,
    "count": int,
    "side": int,
    "tile_size": int,
    "per_tile_seed": int,
    "expected_count": int,
    "ratio": float,
    "p": float,
    "input": str,
    "output": str,
    "root": str,
    "approach": str,
    "key": str,
}

# defaults applied after config merging, so config values can override them
_FALLBACKS = {
    "side": imaging.DEFAULT_SIDE,
    "tile_size": imaging.DEFAULT_TILE,
    "ratio": 0.8,
    "dims": "52x52",
    "split": "valid",
    "ops": 7,
    "ring_dimension": bfv.DEFAULT_N,
    "modulus": bfv.DEFAULT_Q,
    "plaintext_modulus": bfv.DEFAULT_T,
    "relin_base": bfv.DEFAULT_RELIN_BASE,
    "noise_eta": bfv.DEFAULT_NOISE_ETA,
}


def _apply_fallbacks(args):
    for name, value in _FALLBACKS.items():
        if hasattr(args, name) and getattr(args, name) is None:
            setattr(args, name, value)


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required")


def _cat_key_for(args, grid_size: int) -> CatMapKey:
    if args.key:
        key = CatMapKey.from_text(args.key)
        if key.grid_size != grid_size:
            raise ValidationError(
                f"key grid size {key.grid_size} does not match expected {grid_size}"
            )
        return key
    _require(args, "seed")
    return dataset.derive_cat_key(args.seed, grid_size)


def _parse_dims(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
        return (w, h)
    except Exception:
        raise ValidationError(f"dims must look like 52x52, got {text!r}") from None


# -- subcommand handlers -------------------------------------------------------

def _cmd_encode(args):
    _require(args, "subtask", "input", "output")
    img = imaging.load_image(args.input)
    if args.subtask == 1:
        key = _cat_key_for(args, args.tile_size)
        squared = imaging.normalize_geometry(img, args.side)
        out = imaging.encode_tiled(squared, key, args.tile_size, args.per_tile_seed)
        imaging.save_image(out, args.output)
    elif args.subtask == 2:
        key = _cat_key_for(args, args.side)
        squared = imaging.normalize_geometry(img, args.side)
        imaging.save_image(imaging.encode_fullframe(squared, key), args.output)
    else:
        _require(args, "bfv_keys", "seed")
        params, keys = bfv.load_keys(args.bfv_keys)
        crop = imaging.prepare_face_crop(img, imaging.center_crop_box(img))
        Path(args.output).write_bytes(bfv.encrypt_image(crop, keys, params, args.seed))
    print(f"encoded subtask {args.subtask}: {args.input} -> {args.output}")


def _cmd_decode(args):
    _require(args, "subtask", "input")
    if args.subtask == 3:
        blob = Path(args.input).read_bytes()
        if args.inspect:
            info = bfv.parse_blob_header(blob)
            for name, value in info.items():
                print(f"{name}: {value}")
            return
        _require(args, "bfv_keys", "output")
        params, keys = bfv.load_keys(args.bfv_keys)
        img = bfv.decrypt_image(blob, keys, params, dims=_parse_dims(args.dims))
        imaging.save_image(img, args.output)
    else:
        _require(args, "output")
        img = imaging.load_image(args.input)
        if args.subtask == 1:
            key = _cat_key_for(args, args.tile_size)
            out = imaging.decode_tiled(img, key, args.tile_size, args.per_tile_seed)
        else:
            key = _cat_key_for(args, args.side)
            out = imaging.decode_fullframe(img, key)
        imaging.save_image(out, args.output)
    print(f"decoded subtask {args.subtask}: {args.input} -> {args.output}")


def _cmd_keygen(args):
    _require(args, "output", "seed")
    params = bfv.BfvParams(
        ring_dimension=args.ring_dimension,
        ciphertext_modulus=args.modulus,
        plaintext_modulus=args.plaintext_modulus,
        relin_base=args.relin_base,
        noise_eta=args.noise_eta,
    )
    keys = bfv.keygen(params, args.seed)
    bfv.save_keys(args.output, keys, params)
    print(f"wrote keys for n={params.ring_dimension}, q={params.ciphertext_modulus} to {args.output}")


def _cmd_build_dataset(args):
    _require(args, "root", "subtask", "count", "seed")
    config = dataset.default_encoder_config(args.subtask, args.seed)
    if args.per_tile_seed is not None and args.subtask == 1:
        config = dataset.EncoderConfig(
            subtask=1, cat_key=config.cat_key, per_tile_seed=args.per_tile_seed
        )
    manifest = dataset.build_corpus(
        args.root,
        args.subtask,
        args.count,
        args.seed,
        config=config,
        ratio=args.ratio,
        source_dir=args.source,
        derangement=args.derangement,
    )
    counts = manifest.counts()
    print(
        f"built subtask-{args.subtask} corpus: "
        + ", ".join(f"{label}/{split}={n}" for (label, split), n in sorted(counts.items()))
    )


def _cmd_make_samples(args):
    _require(args, "root", "subtask", "out", "approach", "seed")
    manifest = dataset.read_manifest(Path(args.root) / str(args.subtask) / dataset.MANIFEST_NAME)
    cfg = augment.AugmentConfig(p=args.p if args.p is not None else 0.1)
    counts = dataset.emit_samples(manifest, args.root, args.out, args.approach, cfg, args.seed)
    print(f"samples written: train={counts['train']}, valid={counts['valid']}")


def _cmd_augment_preview(args):
    _require(args, "input", "output", "seed")
    img = imaging.load_image(args.input)
    ops = augment.NINE_OPS if args.ops == 9 else augment.SEVEN_OPS
    cfg = augment.AugmentConfig(p=1.0)
    gap = 4
    h, w = img.shape[:2]
    rows = []
    for i, op in enumerate(ops):
        out = augment.apply_augmentations(img, cfg, args.seed + i, ops=(op,))
        row = np.full((h, 2 * w + gap, 3), 255, dtype=np.uint8)
        row[:, :w] = img
        row[:, w + gap :] = out
        rows.append(row)
    sep = np.full((gap, 2 * w + gap, 3), 255, dtype=np.uint8)
    grid = rows[0]
    for row in rows[1:]:
        grid = np.concatenate([grid, sep, row], axis=0)
    imaging.save_image(grid, args.output)
    print(f"preview grid with {len(ops)} ops -> {args.output}")


def _cmd_score(args):
    if args.accs is not None:
        weights = evalkit.Weights(*args.weights) if args.weights else evalkit.Weights()
        value = evalkit.weighted_accuracy(*args.accs, weights=weights)
        print(f"weighted accuracy: {value:.6f}")
        return
    _require(args, "pred", "truth")
    pred = evalkit.parse_submission(Path(args.pred).read_text(), args.expected_count)
    truth = evalkit.parse_submission(Path(args.truth).read_text(), args.expected_count)
    print(f"accuracy: {evalkit.accuracy(pred, truth):.6f}")


def _cmd_ensemble(args):
    _require(args, "output")
    if not args.scores:
        raise UsageError("--scores needs at least one file")
    matrix = evalkit.score_matrix_from_files(args.scores)
    if args.expected_count is not None and len(matrix.pair_ids) != args.expected_count:
        raise ValidationError(
            f"expected {args.expected_count} pairs, got {len(matrix.pair_ids)}"
        )
    submission = evalkit.ensemble(matrix)
    Path(args.output).write_text(evalkit.emit_submission(submission))
    print(f"ensembled {len(matrix.model_ids)} models over {len(matrix.pair_ids)} pairs -> {args.output}")


def _cmd_report(args):
    _require(args, "manifest", "output")
    if not args.scores:
        raise UsageError("--scores needs at least one file")
    manifest = dataset.read_manifest(args.manifest)
    wanted = {r.pair_id: r.label for r in manifest.records if r.split == args.split}
    matrix = evalkit.score_matrix_from_files(args.scores)
    keep = [i for i, pid in enumerate(matrix.pair_ids) if pid in wanted]
    if not keep:
        raise ValidationError(f"no scored pairs fall in split {args.split!r}")
    sub = evalkit.ScoreMatrix(
        pair_ids=tuple(matrix.pair_ids[i] for i in keep),
        model_ids=matrix.model_ids,
        scores=tuple(matrix.scores[i] for i in keep),
    )
    rows = evalkit.report_validation(sub, wanted)
    lines = ["model_id,validation_accuracy,validation_loss"]
    for model_id, acc, loss in rows:
        lines.append(f"{model_id},{acc:.6f},{loss:.6f}")
        print(f"{model_id}: accuracy={acc:.6f} loss={loss:.6f}")
    Path(args.output).write_text("\n".join(lines) + "\n")


def _selftest_checks():
    rng = np.random.default_rng(7)

    def catmap_checks():
        assert period(CatMapKey(2, 1, 1)) == 3
        for _ in range(5):
            n = int(rng.choice([4, 8, 16]))
            key = CatMapKey(n, int(rng.integers(0, n)), int(rng.integers(0, n)), int(rng.integers(1, 9)))
            perm = grid_permutation(key)
            assert sorted(perm.tolist()) == list(range(n * n))
            p = (int(rng.integers(0, n)), int(rng.integers(0, n)))
            assert cat_map_inverse(cat_map_forward(p, key), key) == p
            ident = grid_permutation(key.with_iterations(period(key)))
            assert (ident == np.arange(n * n)).all()

    def imaging_checks():
        img = rng.integers(0, 256, (64, 64, 3), dtype=np.uint8)
        key = CatMapKey(8, 2, 3, 5)
        enc = imaging.encode_tiled(img, key, tile_size=8)
        assert np.array_equal(imaging.decode_tiled(enc, key, tile_size=8), img)
        key2 = CatMapKey(64, 1, 1, 3)
        enc2 = imaging.encode_fullframe(img, key2)
        assert np.array_equal(imaging.decode_fullframe(enc2, key2), img)
        assert np.array_equal(np.sort(enc2.reshape(-1, 3), axis=0), np.sort(img.reshape(-1, 3), axis=0))

    def bfv_checks():
        params = bfv.BfvParams(ring_dimension=64)
        keys = bfv.keygen(params, 11)
        for i in range(3):
            m = rng.integers(0, params.plaintext_modulus, 64, dtype=np.int64)
            ct = bfv.encrypt(m, keys, params, 100 + i)
            assert (bfv.decrypt(ct, keys, params) == m).all()
        from .ring import negacyclic_mul_schoolbook

        m1 = rng.integers(0, params.plaintext_modulus, 64, dtype=np.int64)
        m2 = rng.integers(0, params.plaintext_modulus, 64, dtype=np.int64)
        c1 = bfv.encrypt(m1, keys, params, 201)
        c2 = bfv.encrypt(m2, keys, params, 202)
        total = bfv.decrypt(bfv.add(c1, c2, params), keys, params)
        assert (total == (m1 + m2) % params.plaintext_modulus).all()
        prod = bfv.relinearize(bfv.multiply(c1, c2, params), keys, params)
        want = negacyclic_mul_schoolbook(m1, m2, params.plaintext_modulus)
        assert bfv.decrypt(prod, keys, params).tolist() == want
        blob = bfv.serialize_ciphertexts([c1], params)
        _, parsed = bfv.parse_ciphertexts(blob, params)
        assert all(np.array_equal(a, b) for a, b in zip(parsed[0].polys, c1.polys))

    def augment_checks():
        img = rng.integers(0, 256, (32, 32, 3), dtype=np.uint8)
        cfg = augment.AugmentConfig()
        a = augment.apply_augmentations(img, cfg, 5)
        b = augment.apply_augmentations(img, cfg, 5)
        assert np.array_equal(a, b)
        assert np.array_equal(augment.apply_augmentations(img, augment.AugmentConfig(p=0.0), 5), img)
        assert np.array_equal(augment.horizontal_flip(augment.horizontal_flip(img)), img)
        gray = augment.to_gray(img)
        assert np.array_equal(gray[:, :, 0], gray[:, :, 1])

    def evalkit_checks():
        assert abs(evalkit.weighted_accuracy(1, 0, 0) - 0.1) < 1e-12
        assert abs(evalkit.weighted_accuracy(0, 1, 0) - 0.3) < 1e-12
        assert abs(evalkit.weighted_accuracy(0, 0, 1) - 0.6) < 1e-12
        assert evalkit.parse_submission("1\n0\n1\n") == [1, 0, 1]
        matrix = evalkit.ScoreMatrix((0,), ("m",), ((0.5,),))
        assert evalkit.ensemble(matrix) == [1]

    return [
        ("cat map permutations", catmap_checks),
        ("image scrambling round trips", imaging_checks),
        ("bfv encrypt/add/multiply", bfv_checks),
        ("augmentation determinism", augment_checks),
        ("scoring arithmetic", evalkit_checks),
    ]


def _cmd_selftest(args):
    failures = 0
    for name, check in _selftest_checks():
        try:
            check()
        except Exception as exc:  # report every failing stage
            failures += 1
            print(f"[FAIL] {name}: {exc}")
        else:
            print(f"[ok] {name}")
    if failures:
        raise _SelftestFailure(f"{failures} selftest stage(s) failed")
    print("selftest: all stages passed")


class _SelftestFailure(Exception):
    pass


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privmatch",
        description="Obfuscated-image pair corpora: encoders, datasets, scoring.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="key = value defaults file (flags win)")
        p.add_argument("--seed", type=int, default=None, help="master seed (required when randomized)")

    p = sub.add_parser("encode", help="encode one image with a subtask encoder")
    common(p)
    p.add_argument("--subtask", type=int, choices=(1, 2, 3), default=None)
    p.add_argument("--input", default=None, help="input image file")
    p.add_argument("--output", default=None, help="output image/blob file")
    p.add_argument("--key", default=None, help="cat map key text N=..,a=..,b=..,k=..")
    p.add_argument("--tile-size", type=int, default=None, help="tile side in pixels (default 32)")
    p.add_argument("--side", type=int, default=None, help="square frame side in pixels (default 512)")
    p.add_argument("--per-tile-seed", type=int, default=None, help="derive per-tile iteration counts")
    p.add_argument("--bfv-keys", default=None, help="key file from `privmatch keygen`")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode", help="invert a subtask encoding")
    common(p)
    p.add_argument("--subtask", type=int, choices=(1, 2, 3), default=None)
    p.add_argument("--input", default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--key", default=None)
    p.add_argument("--tile-size", type=int, default=None, help="tile side in pixels (default 32)")
    p.add_argument("--side", type=int, default=None, help="square frame side in pixels (default 512)")
    p.add_argument("--per-tile-seed", type=int, default=None)
    p.add_argument("--bfv-keys", default=None)
    p.add_argument("--dims", default=None, help="decoded image dims for subtask 3 (default 52x52)")
    p.add_argument("--inspect", action="store_true", help="print blob header and exit")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("keygen", help="generate a BFV key file")
    common(p)
    p.add_argument("--output", default=None)
    p.add_argument("--ring-dimension", type=int, default=None, help=f"polynomial ring degree (default {bfv.DEFAULT_N})")
    p.add_argument("--modulus", type=int, default=None, help=f"ciphertext modulus (default {bfv.DEFAULT_Q})")
    p.add_argument("--plaintext-modulus", type=int, default=None, help=f"plaintext modulus (default {bfv.DEFAULT_T})")
    p.add_argument("--relin-base", type=int, default=None, help=f"relinearization digit base (default {bfv.DEFAULT_RELIN_BASE})")
    p.add_argument("--noise-eta", type=int, default=None, help=f"noise sampler bound (default {bfv.DEFAULT_NOISE_ETA})")
    p.set_defaults(func=_cmd_keygen)

    p = sub.add_parser("build-dataset", help="build a pair corpus with manifest")
    common(p)
    p.add_argument("--root", default=None)
    p.add_argument("--subtask", type=int, choices=(1, 2, 3), default=None)
    p.add_argument("--count", type=int, default=None, help="number of originals (required)")
    p.add_argument("--ratio", type=float, default=None, help="train fraction per label class (default 0.8)")
    p.add_argument("--source", default=None, help="folder of user originals (default: synthetic)")
    p.add_argument("--derangement", action="store_true", help="use each encoding once in non-matches")
    p.add_argument("--per-tile-seed", type=int, default=None)
    p.set_defaults(func=_cmd_build_dataset)

    p = sub.add_parser("make-samples", help="emit six-channel tensors from a corpus")
    common(p)
    p.add_argument("--root", default=None)
    p.add_argument("--subtask", type=int, choices=(1, 2, 3), default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--approach", choices=augment.APPROACHES, default=None)
    p.add_argument("--p", type=float, default=None, help="per-op augmentation probability (default 0.1)")
    p.set_defaults(func=_cmd_make_samples)

    p = sub.add_parser("augment-preview", help="render before/after grids per op")
    common(p)
    p.add_argument("--input", default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--ops", type=int, choices=(7, 9), default=None, help="op set size (default 7)")
    p.set_defaults(func=_cmd_augment_preview)

    p = sub.add_parser("score", help="accuracy of a submission, or weighted accuracy")
    common(p)
    p.add_argument("--pred", default=None)
    p.add_argument("--truth", default=None)
    p.add_argument("--expected-count", type=int, default=None, help="required pair count (e.g. 30000 for a full challenge run)")
    p.add_argument("--accs", type=float, nargs=3, default=None, metavar=("A1", "A2", "A3"))
    p.add_argument("--weights", type=float, nargs=3, default=None, metavar=("W1", "W2", "W3"))
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("ensemble", help="average score files into a 0/1 submission")
    common(p)
    p.add_argument("--scores", nargs="+", default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--expected-count", type=int, default=None, help="required pair count (e.g. 30000 for a full challenge run)")
    p.set_defaults(func=_cmd_ensemble)

    p = sub.add_parser("report", help="per-model validation accuracy and loss")
    common(p)
    p.add_argument("--scores", nargs="+", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--split", choices=dataset.SPLITS, default=None, help="split to report on (default valid)")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("selftest", help="run the embedded invariant suite")
    common(p)
    p.set_defaults(func=_cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _merge_config(args)
        _apply_fallbacks(args)
        args.func(args)
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _SelftestFailure as exc:
        print(f"selftest failed: {exc}", file=sys.stderr)
        return EXIT_SELFTEST
    except (ValidationError, PrivmatchError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
