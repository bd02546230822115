"""Textbook BFV homomorphic encryption over Z_q[x]/(x^n + 1).

Messages live mod t and are scaled by delta = floor(q/t) at encryption.
Ciphertexts are lists of 2 (fresh or relinearized) or 3 (after one
multiplication) polynomials with coefficients in [0, q). Secrets are
ternary; noise is centered-binomial with a fixed small bound, and every
sampler takes an explicit seed. Not a hardened cryptosystem: no SIMD
batching, bootstrapping or modulus switching, and parameters are sized
for fast exact tests rather than a security level.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import imaging
from .errors import FormatError, ValidationError
from .ring import NegacyclicEngine, is_power_of_two

# 41-bit prime, 1 mod 2048: NTT-friendly for every power-of-two n <= 1024.
DEFAULT_Q = 1099511678977
DEFAULT_N = 1024
DEFAULT_T = 257
DEFAULT_RELIN_BASE = 256
DEFAULT_NOISE_ETA = 3

_BLOB_MAGIC = b"BFV1"
_KEY_MAGIC = b"BFVK"
_BLOB_HEADER = struct.Struct("<4sIQIII")  # magic, n, q, t, ct count, polys per ct
BLOB_HEADER_SIZE = _BLOB_HEADER.size

_engines: dict[int, NegacyclicEngine] = {}


def _engine(n: int) -> NegacyclicEngine:
    if n not in _engines:
        _engines[n] = NegacyclicEngine(n)
    return _engines[n]


@dataclass(frozen=True)
class BfvParams:
    """Ring and noise parameters; delta is the plaintext scaling factor."""

    ring_dimension: int = DEFAULT_N
    ciphertext_modulus: int = DEFAULT_Q
    plaintext_modulus: int = DEFAULT_T
    relin_base: int = DEFAULT_RELIN_BASE
    noise_eta: int = DEFAULT_NOISE_ETA

    def __post_init__(self):
        n, q, t = self.ring_dimension, self.ciphertext_modulus, self.plaintext_modulus
        if not is_power_of_two(n):
            raise ValidationError(f"ring_dimension must be a power of two, got {n}")
        if not 2 <= t < q:
            raise ValidationError(f"need 2 <= t < q, got t={t}, q={q}")
        if q >= NegacyclicEngine.MAX_Q:
            raise ValidationError(f"ciphertext_modulus must be < 2^41, got {q}")
        if self.relin_base < 2:
            raise ValidationError("relin_base must be >= 2")
        if self.noise_eta < 0:
            raise ValidationError("noise_eta must be >= 0")
        if self.delta < 1:
            raise ValidationError("floor(q/t) must be >= 1")

    @property
    def delta(self) -> int:
        return self.ciphertext_modulus // self.plaintext_modulus

    @property
    def relin_digits(self) -> int:
        """Number of base-T digits needed for a coefficient in [0, q)."""
        count, cap = 1, self.relin_base
        while cap < self.ciphertext_modulus:
            cap *= self.relin_base
            count += 1
        return count

    @property
    def fingerprint(self) -> str:
        return (
            f"{self.ring_dimension}:{self.ciphertext_modulus}:"
            f"{self.plaintext_modulus}"
        )


@dataclass(frozen=True)
class KeyTriple:
    secret: np.ndarray
    public: tuple[np.ndarray, np.ndarray]
    relin: tuple[tuple[np.ndarray, np.ndarray], ...]
    fingerprint: str


@dataclass(frozen=True)
class BfvCiphertext:
    polys: tuple[np.ndarray, ...]
    fingerprint: str

    def __post_init__(self):
        if len(self.polys) not in (2, 3):
            raise ValidationError(f"ciphertext must hold 2 or 3 polys, got {len(self.polys)}")

    @property
    def degree(self) -> int:
        return len(self.polys) - 1


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _ternary(rng, n):
    return rng.integers(-1, 2, n, dtype=np.int64)


def _cbd(rng, n, eta):
    if eta == 0:
        return np.zeros(n, dtype=np.int64)
    bits = rng.integers(0, 2, (n, 2 * eta), dtype=np.int64)
    return bits[:, :eta].sum(axis=1) - bits[:, eta:].sum(axis=1)


def _uniform(rng, n, q):
    return rng.integers(0, q, n, dtype=np.int64)


def plaintext(values, params: BfvParams) -> np.ndarray:
    """Validate and shape a coefficient vector mod t."""
    arr = np.asarray(values, dtype=np.int64)
    if arr.shape != (params.ring_dimension,):
        raise ValidationError(
            f"plaintext must have {params.ring_dimension} coefficients, got {arr.shape}"
        )
    t = params.plaintext_modulus
    if (arr < 0).any() or (arr >= t).any():
        raise ValidationError(f"plaintext coefficients must lie in [0, {t})")
    return arr


def keygen(params: BfvParams, seed) -> KeyTriple:
    """Sample secret/public/relinearization keys; deterministic under seed."""
    rng = _as_rng(seed)
    n, q = params.ring_dimension, params.ciphertext_modulus
    eng = _engine(n)

    s = _ternary(rng, n)
    a = _uniform(rng, n, q)
    e = _cbd(rng, n, params.noise_eta)
    pk0 = (-(eng.mul_mod(a, s % q, q) + e)) % q
    pk1 = a

    s_q = s % q
    s2 = eng.mul_mod(s_q, s_q, q)
    relin = []
    power = 1
    for _ in range(params.relin_digits):
        ai = _uniform(rng, n, q)
        ei = _cbd(rng, n, params.noise_eta)
        scaled = np.array([(power * int(c)) % q for c in s2], dtype=np.int64)
        k0 = (scaled - (eng.mul_mod(ai, s_q, q) + ei)) % q
        relin.append((k0, ai))
        power = power * params.relin_base % q
    return KeyTriple(secret=s, public=(pk0, pk1), relin=tuple(relin), fingerprint=params.fingerprint)


def _check_match(ct_or_keys, params: BfvParams):
    if ct_or_keys.fingerprint != params.fingerprint:
        raise ValidationError(
            f"parameter fingerprint mismatch: {ct_or_keys.fingerprint} vs {params.fingerprint}"
        )


def encrypt(m, keys: KeyTriple, params: BfvParams, seed, noise_free: bool = False) -> BfvCiphertext:
    """c = (delta*m + pk0*u + e1, pk1*u + e2); noise_free is a test hook."""
    _check_match(keys, params)
    m = plaintext(m, params)
    n, q = params.ring_dimension, params.ciphertext_modulus
    eng = _engine(n)
    rng = _as_rng(seed)
    if noise_free:
        u = np.zeros(n, dtype=np.int64)
        e1 = e2 = np.zeros(n, dtype=np.int64)
    else:
        u = _ternary(rng, n)
        e1 = _cbd(rng, n, params.noise_eta)
        e2 = _cbd(rng, n, params.noise_eta)
    pk0, pk1 = keys.public
    c0 = (params.delta * m + eng.mul_mod(pk0, u % q, q) + e1) % q
    c1 = (eng.mul_mod(pk1, u % q, q) + e2) % q
    return BfvCiphertext(polys=(c0, c1), fingerprint=params.fingerprint)


def _eval_at_secret(ct: BfvCiphertext, keys: KeyTriple, params: BfvParams) -> np.ndarray:
    """[c0 + c1*s (+ c2*s^2)]_q as int64 in [0, q)."""
    n, q = params.ring_dimension, params.ciphertext_modulus
    eng = _engine(n)
    s_q = keys.secret % q
    acc = ct.polys[0] % q
    s_power = s_q
    for poly in ct.polys[1:]:
        acc = (acc + eng.mul_mod(poly, s_power, q)) % q
        s_power = eng.mul_mod(s_power, s_q, q)
    return acc


def decrypt(ct: BfvCiphertext, keys: KeyTriple, params: BfvParams) -> np.ndarray:
    """round((t/q) * [ct(s)]_q) mod t; exact while noise is in budget."""
    _check_match(ct, params)
    _check_match(keys, params)
    q, t = params.ciphertext_modulus, params.plaintext_modulus
    v = _eval_at_secret(ct, keys, params)
    return ((t * v + q // 2) // q) % t


def add(c1: BfvCiphertext, c2: BfvCiphertext, params: BfvParams) -> BfvCiphertext:
    """Componentwise sum; decrypts to m1 + m2 mod t."""
    _check_match(c1, params)
    _check_match(c2, params)
    q = params.ciphertext_modulus
    n = params.ring_dimension
    zero = np.zeros(n, dtype=np.int64)
    width = max(len(c1.polys), len(c2.polys))
    a = list(c1.polys) + [zero] * (width - len(c1.polys))
    b = list(c2.polys) + [zero] * (width - len(c2.polys))
    return BfvCiphertext(
        polys=tuple((x + y) % q for x, y in zip(a, b)),
        fingerprint=params.fingerprint,
    )


def _centered(a: np.ndarray, q: int) -> np.ndarray:
    a = a % q
    return np.where(a > q // 2, a - q, a)


def multiply(c1: BfvCiphertext, c2: BfvCiphertext, params: BfvParams) -> BfvCiphertext:
    """Tensor the ciphertexts and scale by t/q; result has degree 2.

    The three tensor components are computed exactly over the integers
    from centered representatives, then rounded coefficientwise. Callers
    must watch noise_budget: once it reaches zero the product no longer
    decrypts to m1*m2.
    """
    _check_match(c1, params)
    _check_match(c2, params)
    if c1.degree != 1 or c2.degree != 1:
        raise ValidationError("multiply expects two degree-1 ciphertexts")
    n, q, t = params.ring_dimension, params.ciphertext_modulus, params.plaintext_modulus
    eng = _engine(n)

    ra = [eng.residues(_centered(p, q)) for p in c1.polys]
    rb = [eng.residues(_centered(p, q)) for p in c2.polys]
    r00 = eng.mul_residues(ra[0], rb[0])
    r01 = eng.mul_residues(ra[0], rb[1])
    r10 = eng.mul_residues(ra[1], rb[0])
    r11 = eng.mul_residues(ra[1], rb[1])
    rmid = eng.add_residues(r01, r10)

    half = q // 2
    out = []
    for res in (r00, rmid, r11):
        exact = eng.residues_to_exact(res)
        out.append(np.array([((t * x + half) // q) % q for x in exact], dtype=np.int64))
    return BfvCiphertext(polys=tuple(out), fingerprint=params.fingerprint)


def relinearize(ct: BfvCiphertext, keys: KeyTriple, params: BfvParams) -> BfvCiphertext:
    """Fold the c2 term back to degree 1 via base-T digits of c2."""
    _check_match(ct, params)
    _check_match(keys, params)
    if ct.degree != 2:
        raise ValidationError("relinearize expects a degree-2 ciphertext")
    n, q = params.ring_dimension, params.ciphertext_modulus
    base = params.relin_base
    eng = _engine(n)

    c0, c1, c2 = ct.polys
    r0, r1 = c0 % q, c1 % q
    rem = c2 % q
    for k0, k1 in keys.relin:
        digit = rem % base
        rem //= base
        r0 = (r0 + eng.mul_mod(k0, digit, q)) % q
        r1 = (r1 + eng.mul_mod(k1, digit, q)) % q
    return BfvCiphertext(polys=(r0, r1), fingerprint=params.fingerprint)


def noise_budget(ct: BfvCiphertext, keys: KeyTriple, params: BfvParams) -> float:
    """Bits of headroom: log2(q / (2*||[t*ct(s)]_q||_inf)), floored at 0.

    The scaled residual [t*ct(s)]_q cancels the message term, so no
    plaintext is needed. Budget near zero means decryption is no longer
    reliable.
    """
    _check_match(ct, params)
    q, t = params.ciphertext_modulus, params.plaintext_modulus
    v = _eval_at_secret(ct, keys, params)
    w = _centered(t * v % q, q)
    norm = max(1, int(np.abs(w).max()))
    return max(0.0, math.log2(q / (2 * norm)))


def decryption_reliable(
    ct: BfvCiphertext, keys: KeyTriple, params: BfvParams, margin_bits: float = 1.0
) -> bool:
    """Conservative trust flag: require at least margin_bits of budget."""
    return noise_budget(ct, keys, params) >= margin_bits


# -- serialization ----------------------------------------------------------

def _poly_bytes(poly: np.ndarray) -> bytes:
    return poly.astype("<u8").tobytes()


def serialize_ciphertexts(cts: list[BfvCiphertext], params: BfvParams) -> bytes:
    """Self-describing blob: header then count * polys_per_ct * n u64 LE."""
    if not cts:
        raise ValidationError("cannot serialize an empty ciphertext list")
    widths = {len(ct.polys) for ct in cts}
    if len(widths) != 1:
        raise ValidationError("all ciphertexts in one blob must share a degree")
    for ct in cts:
        _check_match(ct, params)
    npolys = widths.pop()
    header = _BLOB_HEADER.pack(
        _BLOB_MAGIC,
        params.ring_dimension,
        params.ciphertext_modulus,
        params.plaintext_modulus,
        len(cts),
        npolys,
    )
    body = b"".join(_poly_bytes(p) for ct in cts for p in ct.polys)
    return header + body


def parse_blob_header(blob: bytes) -> dict:
    if len(blob) < BLOB_HEADER_SIZE:
        raise FormatError("blob shorter than header")
    magic, n, q, t, count, npolys = _BLOB_HEADER.unpack_from(blob)
    if magic != _BLOB_MAGIC:
        raise FormatError(f"bad blob magic {magic!r}")
    if count < 1 or npolys not in (2, 3):
        raise FormatError(f"bad blob shape: count={count}, polys={npolys}")
    return {"n": n, "q": q, "t": t, "count": count, "polys_per_ct": npolys}


def parse_ciphertexts(blob: bytes, params: BfvParams | None = None) -> tuple[BfvParams, list[BfvCiphertext]]:
    info = parse_blob_header(blob)
    n, q, t = info["n"], info["q"], info["t"]
    parsed = BfvParams(
        ring_dimension=n,
        ciphertext_modulus=q,
        plaintext_modulus=t,
        relin_base=params.relin_base if params else DEFAULT_RELIN_BASE,
        noise_eta=params.noise_eta if params else DEFAULT_NOISE_ETA,
    )
    if params is not None and parsed.fingerprint != params.fingerprint:
        raise FormatError(
            f"blob parameters {parsed.fingerprint} do not match {params.fingerprint}"
        )
    expected = BLOB_HEADER_SIZE + info["count"] * info["polys_per_ct"] * n * 8
    if len(blob) != expected:
        raise FormatError(f"blob length {len(blob)} != expected {expected}")
    cts = []
    offset = BLOB_HEADER_SIZE
    for _ in range(info["count"]):
        polys = []
        for _ in range(info["polys_per_ct"]):
            coeffs = np.frombuffer(blob, dtype="<u8", count=n, offset=offset).astype(np.int64)
            if (coeffs >= q).any():
                raise FormatError("blob coefficient out of range")
            polys.append(coeffs)
            offset += n * 8
        cts.append(BfvCiphertext(polys=tuple(polys), fingerprint=parsed.fingerprint))
    return parsed, cts


def save_keys(path, keys: KeyTriple, params: BfvParams) -> None:
    n, q = params.ring_dimension, params.ciphertext_modulus
    header = struct.pack(
        "<4sIQIIII",
        _KEY_MAGIC,
        n,
        q,
        params.plaintext_modulus,
        params.relin_base,
        params.noise_eta,
        len(keys.relin),
    )
    polys = [keys.secret % q, keys.public[0], keys.public[1]]
    for k0, k1 in keys.relin:
        polys.extend([k0, k1])
    with open(path, "wb") as fh:
        fh.write(header)
        for p in polys:
            fh.write(_poly_bytes(p))


def load_keys(path) -> tuple[BfvParams, KeyTriple]:
    with open(path, "rb") as fh:
        blob = fh.read()
    head = struct.Struct("<4sIQIIII")
    if len(blob) < head.size:
        raise FormatError("key file shorter than header")
    magic, n, q, t, base, eta, nrelin = head.unpack_from(blob)
    if magic != _KEY_MAGIC:
        raise FormatError(f"bad key magic {magic!r}")
    params = BfvParams(n, q, t, base, eta)
    need = head.size + (3 + 2 * nrelin) * n * 8
    if len(blob) != need:
        raise FormatError(f"key file length {len(blob)} != expected {need}")

    def poly_at(i):
        return np.frombuffer(blob, dtype="<u8", count=n, offset=head.size + i * n * 8).astype(np.int64)

    secret = poly_at(0)
    secret = np.where(secret > q // 2, secret - q, secret)  # ternary stored mod q
    public = (poly_at(1), poly_at(2))
    relin = tuple((poly_at(3 + 2 * i), poly_at(4 + 2 * i)) for i in range(nrelin))
    return params, KeyTriple(secret, public, relin, params.fingerprint)


# -- image packing ----------------------------------------------------------

def pack_image_plaintexts(img: np.ndarray, params: BfvParams) -> list[np.ndarray]:
    """Row-major channel-interleaved pixels into ceil(H*W*3/n) vectors."""
    imaging.require_rgb8(img)
    if params.plaintext_modulus <= 255:
        raise ValidationError("plaintext_modulus must exceed 255 to hold bytes")
    n = params.ring_dimension
    flat = img.reshape(-1).astype(np.int64)
    count = -(-flat.size // n)
    padded = np.zeros(count * n, dtype=np.int64)
    padded[: flat.size] = flat
    return [padded[i * n : (i + 1) * n] for i in range(count)]


def encrypt_image(img: np.ndarray, keys: KeyTriple, params: BfvParams, seed) -> bytes:
    """Encrypt an RGB image into one self-describing ciphertext blob."""
    plains = pack_image_plaintexts(img, params)
    seeds = np.random.SeedSequence(seed).spawn(len(plains))
    cts = [
        encrypt(m, keys, params, np.random.default_rng(s))
        for m, s in zip(plains, seeds)
    ]
    return serialize_ciphertexts(cts, params)


def decrypt_image(
    blob: bytes, keys: KeyTriple, params: BfvParams, dims: tuple[int, int] = (52, 52)
) -> np.ndarray:
    """Exact inverse of encrypt_image for fresh blobs."""
    _, cts = parse_ciphertexts(blob, params)
    height, width = dims
    need = height * width * 3
    flat = np.concatenate([decrypt(ct, keys, params) for ct in cts])
    if flat.size < need:
        raise ValidationError(f"blob holds {flat.size} values, image needs {need}")
    values = flat[:need]
    if (values > 255).any():
        raise FormatError("decrypted values exceed byte range")
    return values.astype(np.uint8).reshape(height, width, 3)


def ciphertext_to_image(blob: bytes, target: tuple[int, int] = (52, 52)) -> np.ndarray:
    """Deterministic byte-to-pixel view of a blob for detector input.

    Payload bytes fill a 3-channel square of side ceil(sqrt(L/3)) row-major
    (zero-padded tail), which is then resized to target (width, height).
    Necessarily lossy: this is a visualization of ciphertext bytes, not a
    decryption.
    """
    parse_blob_header(blob)
    payload = np.frombuffer(blob, dtype=np.uint8, offset=BLOB_HEADER_SIZE)
    side = math.ceil(math.sqrt(payload.size / 3)) if payload.size else 1
    canvas = np.zeros(side * side * 3, dtype=np.uint8)
    canvas[: payload.size] = payload
    img = canvas.reshape(side, side, 3)
    width, height = target
    return imaging.resize(img, width, height)
