"""Negacyclic polynomial arithmetic in Z[x]/(x^n + 1).

Products are computed exactly over the integers via number theoretic
transforms modulo a fixed set of auxiliary primes, then recombined with
the Chinese remainder theorem. The auxiliary primes p satisfy
p = 1 (mod 2*8192), so any power-of-two ring degree up to 8192 works.
A quadratic schoolbook multiplier is kept as the independent oracle.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

# Four ~2^26 primes, each = 1 mod 2^14. Their product (~2^105) bounds the
# magnitude of any exact product coefficient handled by the engine.
AUX_PRIMES = (67239937, 67452929, 67502081, 67584001)

_SPLIT = 21  # limb split for int64-safe (small * big) mod q
_MASK = (1 << _SPLIT) - 1


def is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def find_root_of_unity(p: int, order: int) -> int:
    """Element of exact multiplicative order `order` mod prime p."""
    if (p - 1) % order:
        raise ValidationError(f"{order} does not divide {p}-1")
    for g in range(2, p):
        c = pow(g, (p - 1) // order, p)
        if pow(c, order // 2, p) != 1:
            return c
    raise ValidationError(f"no element of order {order} mod {p}")


def _bitrev(i: int, bits: int) -> int:
    out = 0
    for _ in range(bits):
        out = (out << 1) | (i & 1)
        i >>= 1
    return out


class PrimeNtt:
    """Iterative negacyclic NTT mod a prime p < 2^31 (int64-safe)."""

    def __init__(self, p: int, n: int):
        if not is_power_of_two(n):
            raise ValidationError(f"ring degree must be a power of two, got {n}")
        if p >= 1 << 31:
            raise ValidationError(f"prime {p} too large for the int64 butterfly")
        self.p = p
        self.n = n
        logn = n.bit_length() - 1
        psi = find_root_of_unity(p, 2 * n)
        # twiddles in bit-reversed order fold the psi twist into the butterflies
        self.w = np.array(
            [pow(psi, _bitrev(i, logn), p) for i in range(n)], dtype=np.int64
        )
        self.ninv = pow(n, -1, p)

    def forward(self, a: np.ndarray) -> np.ndarray:
        p, n = self.p, self.n
        a = np.asarray(a, dtype=np.int64) % p
        half = n // 2
        while half >= 1:
            groups = n // (2 * half)
            z = self.w[groups : 2 * groups]
            v = a.reshape(groups, 2, half)
            lo = v[:, 0, :].copy()
            hi = v[:, 1, :] * z[:, None] % p
            v[:, 0, :] = (lo + hi) % p
            v[:, 1, :] = (lo - hi) % p
            half //= 2
        return a

    def inverse(self, a: np.ndarray) -> np.ndarray:
        p, n = self.p, self.n
        a = np.asarray(a, dtype=np.int64) % p
        half = 1
        while half < n:
            groups = n // (2 * half)
            z = self.w[groups : 2 * groups][::-1]
            v = a.reshape(groups, 2, half)
            lo = v[:, 0, :].copy()
            hi = v[:, 1, :].copy()
            v[:, 0, :] = (lo + hi) % p
            v[:, 1, :] = z[:, None] * (hi - lo) % p
            half *= 2
        return a * self.ninv % p

    def multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return self.inverse(self.forward(a) * self.forward(b) % self.p)


def negacyclic_mul_schoolbook(a, b, modulus: int | None = None) -> list[int]:
    """O(n^2) oracle: exact a*b mod (x^n + 1), optionally reduced mod m."""
    a = [int(x) for x in a]
    b = [int(x) for x in b]
    n = len(a)
    if len(b) != n:
        raise ValidationError("operands must share one ring degree")
    full = [0] * (2 * n)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                full[i + j] += ai * bj
    out = [full[i] - full[i + n] for i in range(n)]
    if modulus is not None:
        out = [c % modulus for c in out]
    return out


def ntt_negacyclic_mul(a, b, q: int) -> list[int]:
    """Single-modulus NTT product mod q; needs q prime, q = 1 (mod 2n)."""
    a = np.asarray(a, dtype=np.int64)
    ntt = PrimeNtt(q, len(a))
    return ntt.multiply(a, np.asarray(b, dtype=np.int64)).tolist()


class NegacyclicEngine:
    """Exact products in Z[x]/(x^n + 1) for one fixed degree n.

    mul_exact returns centered Python ints; mul_mod reduces mod q with a
    vectorized Garner recombination (q below 2^41 keeps every
    intermediate inside int64).
    """

    MAX_Q = 1 << 41

    def __init__(self, n: int):
        if not is_power_of_two(n) or n > 8192:
            raise ValidationError(f"ring degree must be a power of two <= 8192, got {n}")
        self.n = n
        self.ntts = [PrimeNtt(p, n) for p in AUX_PRIMES]
        self.capacity = 1
        for p in AUX_PRIMES:
            self.capacity *= p
        # CRT weights for exact reconstruction
        self._lambdas = []
        for p in AUX_PRIMES:
            m = self.capacity // p
            self._lambdas.append(m * pow(m, -1, p))
        # Garner constants
        p0, p1, p2, p3 = AUX_PRIMES
        self._inv_p0_p1 = pow(p0, -1, p1)
        self._inv_p01_p2 = pow(p0 * p1 % p2, -1, p2)
        self._inv_p012_p3 = pow(p0 * p1 * p2 % p3, -1, p3)
        self._p0_mod_p2 = p0 % p2
        self._p0_mod_p3 = p0 % p3
        self._p01_mod_p3 = p0 * p1 % p3

    def residues(self, a: np.ndarray) -> list[np.ndarray]:
        a = np.asarray(a, dtype=np.int64)
        return [a % p for p in AUX_PRIMES]

    def mul_residues(self, ra, rb) -> list[np.ndarray]:
        return [ntt.multiply(x, y) for ntt, x, y in zip(self.ntts, ra, rb)]

    def add_residues(self, ra, rb) -> list[np.ndarray]:
        return [(x + y) % p for x, y, p in zip(ra, rb, AUX_PRIMES)]

    def _garner_digits(self, res):
        p0, p1, p2, p3 = AUX_PRIMES
        d0 = res[0]
        d1 = (res[1] - d0) % p1 * self._inv_p0_p1 % p1
        c2 = (d0 + d1 * self._p0_mod_p2) % p2
        d2 = (res[2] - c2) % p2 * self._inv_p01_p2 % p2
        c3 = (d0 + d1 * self._p0_mod_p3) % p3
        c3 = (c3 + d2 * self._p01_mod_p3) % p3
        d3 = (res[3] - c3) % p3 * self._inv_p012_p3 % p3
        return d0, d1, d2, d3

    def residues_to_exact(self, res) -> list[int]:
        """Centered Python-int coefficients of the exact product."""
        cap, half = self.capacity, self.capacity // 2
        acc = [0] * self.n
        for lam, r in zip(self._lambdas, res):
            values = r.tolist()
            for i in range(self.n):
                acc[i] += lam * values[i]
        out = []
        for x in acc:
            x %= cap
            out.append(x - cap if x > half else x)
        return out

    def residues_to_mod(self, res, q: int) -> np.ndarray:
        """Centered exact value reduced into [0, q), entirely in int64."""
        if q >= self.MAX_Q:
            raise ValidationError(f"modulus {q} exceeds engine limit {self.MAX_Q}")
        p0, p1, p2, p3 = AUX_PRIMES
        d0, d1, d2, d3 = self._garner_digits(res)
        negative = d3 > p3 // 2

        def mulmod_small(s, x):
            hi = ((s * (x >> _SPLIT)) % q << _SPLIT) % q
            return (hi + s * (x & _MASK)) % q

        acc = d3 % q
        acc = (mulmod_small(p2, acc) + d2) % q
        acc = (mulmod_small(p1, acc) + d1) % q
        acc = (mulmod_small(p0, acc) + d0) % q
        return np.where(negative, (acc - self.capacity % q) % q, acc)

    def mul_exact(self, a, b) -> list[int]:
        return self.residues_to_exact(self.mul_residues(self.residues(a), self.residues(b)))

    def mul_mod(self, a, b, q: int) -> np.ndarray:
        return self.residues_to_mod(self.mul_residues(self.residues(a), self.residues(b)), q)
