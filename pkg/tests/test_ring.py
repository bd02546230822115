import numpy as np
import pytest

from privmatch.errors import ValidationError
from privmatch.ring import (
    AUX_PRIMES,
    NegacyclicEngine,
    PrimeNtt,
    negacyclic_mul_schoolbook,
    ntt_negacyclic_mul,
)

# prime = 1 mod 2048, small enough for the single-modulus NTT path
SMALL_Q = 1073750017


def test_negacyclic_wraparound_sign():
    # x * x^(n-1) = x^n = -1 in Z[x]/(x^n + 1)
    n = 8
    a = [0, 1] + [0] * 6
    b = [0] * 7 + [1]
    assert negacyclic_mul_schoolbook(a, b) == [-1] + [0] * 7


def test_prime_ntt_matches_schoolbook():
    rng = np.random.default_rng(3)
    for n in (8, 64, 256):
        ntt = PrimeNtt(AUX_PRIMES[0], n)
        for _ in range(5):
            a = rng.integers(0, AUX_PRIMES[0], n)
            b = rng.integers(0, AUX_PRIMES[0], n)
            got = ntt.multiply(a, b).tolist()
            want = negacyclic_mul_schoolbook(a, b, AUX_PRIMES[0])
            assert got == want


def test_single_modulus_ntt_mul():
    rng = np.random.default_rng(4)
    for n in (16, 128):
        for _ in range(4):
            a = rng.integers(0, SMALL_Q, n)
            b = rng.integers(0, SMALL_Q, n)
            assert ntt_negacyclic_mul(a, b, SMALL_Q) == negacyclic_mul_schoolbook(a, b, SMALL_Q)


def test_engine_exact_signed():
    rng = np.random.default_rng(5)
    eng = NegacyclicEngine(64)
    for _ in range(10):
        a = rng.integers(-(2**40), 2**40, 64)
        b = rng.integers(-(2**40), 2**40, 64)
        assert eng.mul_exact(a, b) == negacyclic_mul_schoolbook(a, b)


def test_engine_mod_q_41bit():
    rng = np.random.default_rng(6)
    q = 1099511678977
    eng = NegacyclicEngine(128)
    for _ in range(8):
        a = rng.integers(0, q, 128)
        b = rng.integers(0, q, 128)
        got = eng.mul_mod(a, b, q).tolist()
        assert got == negacyclic_mul_schoolbook(a, b, q)


def test_engine_mod_q_with_centered_inputs():
    rng = np.random.default_rng(7)
    q = 1099511678977
    eng = NegacyclicEngine(64)
    a = rng.integers(-(q // 2), q // 2, 64)
    b = rng.integers(-(q // 2), q // 2, 64)
    assert eng.mul_mod(a, b, q).tolist() == negacyclic_mul_schoolbook(a, b, q)


def test_engine_rejects_bad_degree_and_modulus():
    with pytest.raises(ValidationError):
        NegacyclicEngine(96)
    with pytest.raises(ValidationError):
        NegacyclicEngine(16384)
    eng = NegacyclicEngine(16)
    with pytest.raises(ValidationError):
        eng.mul_mod(np.zeros(16, np.int64), np.zeros(16, np.int64), 1 << 41)


def test_schoolbook_rejects_mismatched_lengths():
    with pytest.raises(ValidationError):
        negacyclic_mul_schoolbook([1, 2], [1, 2, 3])
