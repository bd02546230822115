import math

import numpy as np
import pytest

from privmatch import bfv
from privmatch.errors import FormatError, ValidationError
from privmatch.ring import negacyclic_mul_schoolbook


@pytest.fixture(scope="module")
def small():
    params = bfv.BfvParams(ring_dimension=128)
    return params, bfv.keygen(params, 42)


@pytest.fixture(scope="module")
def full():
    params = bfv.BfvParams()
    return params, bfv.keygen(params, 42)


def rand_plain(rng, params):
    return rng.integers(0, params.plaintext_modulus, params.ring_dimension, dtype=np.int64)


def const_plain(value, params):
    m = np.zeros(params.ring_dimension, dtype=np.int64)
    m[0] = value
    return m


def test_keygen_deterministic(small):
    params, _ = small
    k1 = bfv.keygen(params, 7)
    k2 = bfv.keygen(params, 7)
    assert np.array_equal(k1.secret, k2.secret)
    assert all(np.array_equal(a, b) for a, b in zip(k1.public, k2.public))
    for (a0, a1), (b0, b1) in zip(k1.relin, k2.relin):
        assert np.array_equal(a0, b0) and np.array_equal(a1, b1)
    k3 = bfv.keygen(params, 8)
    assert not np.array_equal(k3.public[1], k1.public[1])


def test_public_key_relation_is_small_noise(small):
    params, keys = small
    from privmatch.ring import NegacyclicEngine

    q = params.ciphertext_modulus
    eng = NegacyclicEngine(params.ring_dimension)
    residue = (keys.public[0] + eng.mul_mod(keys.public[1], keys.secret % q, q)) % q
    centered = np.where(residue > q // 2, residue - q, residue)
    assert np.abs(centered).max() <= params.noise_eta


def test_zero_roundtrip(small):
    params, keys = small
    zero = np.zeros(params.ring_dimension, dtype=np.int64)
    assert (bfv.decrypt(bfv.encrypt(zero, keys, params, 1), keys, params) == 0).all()


def test_random_roundtrips(small):
    params, keys = small
    rng = np.random.default_rng(9)
    for i in range(50):
        m = rand_plain(rng, params)
        ct = bfv.encrypt(m, keys, params, 1000 + i)
        assert (bfv.decrypt(ct, keys, params) == m).all()


def test_roundtrips_at_default_dimensions(full):
    params, keys = full
    rng = np.random.default_rng(10)
    for i in range(5):
        m = rand_plain(rng, params)
        assert (bfv.decrypt(bfv.encrypt(m, keys, params, i), keys, params) == m).all()


def test_encryption_is_probabilistic(small):
    params, keys = small
    m = const_plain(99, params)
    c1 = bfv.encrypt(m, keys, params, 1)
    c2 = bfv.encrypt(m, keys, params, 2)
    assert not np.array_equal(c1.polys[0], c2.polys[0])
    assert (bfv.decrypt(c1, keys, params) == bfv.decrypt(c2, keys, params)).all()


def test_add_identity_and_constants(small):
    params, keys = small
    rng = np.random.default_rng(3)
    m = rand_plain(rng, params)
    zero = np.zeros(params.ring_dimension, dtype=np.int64)
    total = bfv.add(bfv.encrypt(m, keys, params, 5), bfv.encrypt(zero, keys, params, 6), params)
    assert (bfv.decrypt(total, keys, params) == m).all()

    c3 = bfv.encrypt(const_plain(3, params), keys, params, 7)
    c4 = bfv.encrypt(const_plain(4, params), keys, params, 8)
    got = bfv.decrypt(bfv.add(c3, c4, params), keys, params)
    assert got[0] == 7 and (got[1:] == 0).all()


def test_add_random_pairs_match_oracle(small):
    params, keys = small
    t = params.plaintext_modulus
    rng = np.random.default_rng(4)
    for i in range(20):
        m1, m2 = rand_plain(rng, params), rand_plain(rng, params)
        ct = bfv.add(
            bfv.encrypt(m1, keys, params, 2 * i), bfv.encrypt(m2, keys, params, 2 * i + 1), params
        )
        assert (bfv.decrypt(ct, keys, params) == (m1 + m2) % t).all()


def test_multiply_identity_and_constants(small):
    params, keys = small
    rng = np.random.default_rng(5)
    m = rand_plain(rng, params)
    one = const_plain(1, params)
    prod = bfv.multiply(bfv.encrypt(m, keys, params, 1), bfv.encrypt(one, keys, params, 2), params)
    assert prod.degree == 2
    assert (bfv.decrypt(prod, keys, params) == m).all()
    relin = bfv.relinearize(prod, keys, params)
    assert relin.degree == 1
    assert (bfv.decrypt(relin, keys, params) == m).all()

    c3 = bfv.encrypt(const_plain(3, params), keys, params, 3)
    c4 = bfv.encrypt(const_plain(4, params), keys, params, 4)
    got = bfv.decrypt(bfv.relinearize(bfv.multiply(c3, c4, params), keys, params), keys, params)
    assert got[0] == 12 and (got[1:] == 0).all()


def test_multiply_negacyclic_wraparound(small):
    params, keys = small
    n, t = params.ring_dimension, params.plaintext_modulus
    mx = np.zeros(n, dtype=np.int64)
    mx[1] = 1  # x
    mtop = np.zeros(n, dtype=np.int64)
    mtop[n - 1] = 1  # x^(n-1)
    prod = bfv.multiply(
        bfv.encrypt(mx, keys, params, 1), bfv.encrypt(mtop, keys, params, 2), params
    )
    got = bfv.decrypt(prod, keys, params)
    assert got[0] == t - 1 and (got[1:] == 0).all()


def test_multiply_random_pairs_match_schoolbook_oracle(small):
    params, keys = small
    t = params.plaintext_modulus
    rng = np.random.default_rng(6)
    for i in range(10):
        m1, m2 = rand_plain(rng, params), rand_plain(rng, params)
        c = bfv.multiply(
            bfv.encrypt(m1, keys, params, 3 * i), bfv.encrypt(m2, keys, params, 3 * i + 1), params
        )
        want = negacyclic_mul_schoolbook(m1, m2, t)
        assert bfv.decrypt(c, keys, params).tolist() == want
        assert bfv.decrypt(bfv.relinearize(c, keys, params), keys, params).tolist() == want


def test_multiply_requires_degree_one(small):
    params, keys = small
    m = const_plain(1, params)
    c = bfv.encrypt(m, keys, params, 1)
    deg2 = bfv.multiply(c, c, params)
    with pytest.raises(ValidationError):
        bfv.multiply(deg2, c, params)
    with pytest.raises(ValidationError):
        bfv.relinearize(c, keys, params)


def test_fresh_noise_budget_floor(full):
    # measured ~23.1..23.7 bits at the default parameters
    params, keys = full
    rng = np.random.default_rng(12)
    for i in range(5):
        ct = bfv.encrypt(rand_plain(rng, params), keys, params, 50 + i)
        assert bfv.noise_budget(ct, keys, params) > 20.0


def test_zero_noise_hook_budget_formula(full):
    params, keys = full
    zero = np.zeros(params.ring_dimension, dtype=np.int64)
    ct = bfv.encrypt(zero, keys, params, 1, noise_free=True)
    assert bfv.noise_budget(ct, keys, params) == pytest.approx(
        math.log2(params.ciphertext_modulus / 2), abs=1e-12
    )
    assert (bfv.decrypt(ct, keys, params) == 0).all()


def test_budget_non_increasing_add_and_decreasing_multiply(small):
    params, keys = small
    rng = np.random.default_rng(13)
    m = rand_plain(rng, params)
    ct = bfv.encrypt(m, keys, params, 77)
    b0 = bfv.noise_budget(ct, keys, params)

    doubled = bfv.add(ct, ct, params)
    assert bfv.noise_budget(doubled, keys, params) == pytest.approx(b0 - 1.0, abs=1e-9)

    other = bfv.encrypt(rand_plain(rng, params), keys, params, 78)
    b_other = bfv.noise_budget(other, keys, params)
    assert bfv.noise_budget(bfv.add(ct, other, params), keys, params) <= min(b0, b_other) + 0.5

    prod = bfv.relinearize(bfv.multiply(ct, other, params), keys, params)
    assert bfv.noise_budget(prod, keys, params) < min(b0, b_other) - 5.0


def test_repeated_squaring_exhausts_budget(full):
    params, keys = full
    rng = np.random.default_rng(14)
    m = rand_plain(rng, params)
    plain = m.tolist()
    ct = bfv.encrypt(m, keys, params, 90)

    saw_failure = False
    for _ in range(4):
        ct = bfv.relinearize(bfv.multiply(ct, ct, params), keys, params)
        plain = negacyclic_mul_schoolbook(plain, plain, params.plaintext_modulus)
        trusted = bfv.decryption_reliable(ct, keys, params)
        correct = bfv.decrypt(ct, keys, params).tolist() == plain
        if trusted:
            assert correct  # the flag must never bless a wrong decryption
        else:
            assert bfv.noise_budget(ct, keys, params) < 1.0
            assert not correct
            saw_failure = True
            break
    assert saw_failure


def test_serialization_roundtrip(small):
    params, keys = small
    rng = np.random.default_rng(15)
    cts = [bfv.encrypt(rand_plain(rng, params), keys, params, 200 + i) for i in range(3)]
    blob = bfv.serialize_ciphertexts(cts, params)
    parsed_params, parsed = bfv.parse_ciphertexts(blob, params)
    assert parsed_params.fingerprint == params.fingerprint
    assert len(parsed) == 3
    for a, b in zip(cts, parsed):
        assert all(np.array_equal(x, y) for x, y in zip(a.polys, b.polys))
    assert bfv.serialize_ciphertexts(parsed, params) == blob


def test_parse_rejects_malformed_blobs(small):
    params, keys = small
    blob = bfv.serialize_ciphertexts([bfv.encrypt(const_plain(1, params), keys, params, 1)], params)
    with pytest.raises(FormatError):
        bfv.parse_ciphertexts(b"XXXX" + blob[4:], params)
    with pytest.raises(FormatError):
        bfv.parse_ciphertexts(blob[:-8], params)
    with pytest.raises(FormatError):
        bfv.parse_ciphertexts(blob[:10], params)
    other = bfv.BfvParams(ring_dimension=64)
    with pytest.raises(FormatError):
        bfv.parse_ciphertexts(blob, other)


def test_key_file_roundtrip(tmp_path, small):
    params, keys = small
    path = tmp_path / "keys.bfv"
    bfv.save_keys(path, keys, params)
    loaded_params, loaded = bfv.load_keys(path)
    assert loaded_params == params
    assert np.array_equal(loaded.secret, keys.secret)
    assert all(np.array_equal(a, b) for a, b in zip(loaded.public, keys.public))
    m = const_plain(5, params)
    ct = bfv.encrypt(m, loaded, loaded_params, 3)
    assert bfv.decrypt(ct, keys, params)[0] == 5


def test_image_packing_and_blob_size(full):
    params, keys = full
    rng = np.random.default_rng(16)
    img = rng.integers(0, 256, (52, 52, 3), dtype=np.uint8)

    plains = bfv.pack_image_plaintexts(img, params)
    n = params.ring_dimension
    assert len(plains) == -(-52 * 52 * 3 // n)
    flat = np.concatenate(plains)
    assert np.array_equal(flat[: 52 * 52 * 3], img.reshape(-1))
    assert (flat[52 * 52 * 3 :] == 0).all()

    zero_plains = bfv.pack_image_plaintexts(np.zeros((52, 52, 3), np.uint8), params)
    assert all((p == 0).all() for p in zero_plains)

    blob = bfv.encrypt_image(img, keys, params, 77)
    expected = bfv.BLOB_HEADER_SIZE + len(plains) * 2 * n * 8
    assert len(blob) == expected


def test_encrypt_decrypt_image_roundtrip(full):
    params, keys = full
    rng = np.random.default_rng(17)
    img = rng.integers(0, 256, (52, 52, 3), dtype=np.uint8)
    blob = bfv.encrypt_image(img, keys, params, 123)
    assert np.array_equal(bfv.decrypt_image(blob, keys, params), img)
    # deterministic under seed
    assert bfv.encrypt_image(img, keys, params, 123) == blob
    assert bfv.encrypt_image(img, keys, params, 124) != blob


def test_ciphertext_to_image_determinism_and_dims(full):
    params, keys = full
    rng = np.random.default_rng(18)
    img = rng.integers(0, 256, (52, 52, 3), dtype=np.uint8)
    blob = bfv.encrypt_image(img, keys, params, 5)
    view1 = bfv.ciphertext_to_image(blob)
    view2 = bfv.ciphertext_to_image(blob)
    assert np.array_equal(view1, view2)
    assert view1.shape == (52, 52, 3)
    assert bfv.ciphertext_to_image(blob, target=(16, 24)).shape == (24, 16, 3)
    with pytest.raises(FormatError):
        bfv.ciphertext_to_image(b"NOPE" + blob[4:])


def test_ciphertext_to_image_empty_payload_is_all_zero():
    import struct

    header = struct.pack("<4sIQIII", b"BFV1", 64, 1099511678977, 257, 1, 2)
    img = bfv.ciphertext_to_image(header, target=(8, 8))
    assert img.shape == (8, 8, 3)
    assert (img == 0).all()


def test_params_validation():
    with pytest.raises(ValidationError):
        bfv.BfvParams(ring_dimension=100)
    with pytest.raises(ValidationError):
        bfv.BfvParams(plaintext_modulus=1)
    with pytest.raises(ValidationError):
        bfv.BfvParams(ciphertext_modulus=1 << 41)
    with pytest.raises(ValidationError):
        bfv.BfvParams(plaintext_modulus=2**41 - 1)


def test_fingerprint_mismatch_rejected(small, full):
    params_small, keys_small = small
    params_full, keys_full = full
    m = const_plain(1, params_small)
    ct = bfv.encrypt(m, keys_small, params_small, 1)
    with pytest.raises(ValidationError):
        bfv.decrypt(ct, keys_full, params_full)
    with pytest.raises(ValidationError):
        bfv.encrypt(m, keys_full, params_small, 1)
