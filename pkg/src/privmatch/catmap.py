"""Generalized Arnold cat map on an N x N integer grid.

One iteration sends (x, y) to (x + b*y mod N, a*x + (a*b + 1)*y mod N).
The transform matrix [[1, b], [a, a*b + 1]] has determinant 1 for every
(a, b), so the induced map is a bijection on Z_N x Z_N unconditionally.
Coordinates are (column x, row y) with the origin at the top-left.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PeriodLimitError, ValidationError

# Grid sides above this would overflow int64 in the vectorized path.
MAX_GRID_SIZE = 1 << 16


@dataclass(frozen=True)
class CatMapKey:
    """Permutation key: grid side N, coefficients (a, b), iteration count k."""

    grid_size: int
    a: int
    b: int
    iterations: int = 1

    def __post_init__(self):
        if self.grid_size < 2:
            raise ValidationError(f"grid_size must be >= 2, got {self.grid_size}")
        if self.grid_size > MAX_GRID_SIZE:
            raise ValidationError(f"grid_size must be <= {MAX_GRID_SIZE}")
        if self.iterations < 1:
            raise ValidationError(f"iterations must be >= 1, got {self.iterations}")
        if self.a < 0 or self.b < 0:
            raise ValidationError("coefficients a, b must be non-negative")

    def with_iterations(self, k: int) -> "CatMapKey":
        return CatMapKey(self.grid_size, self.a, self.b, k)

    def to_text(self) -> str:
        return f"N={self.grid_size},a={self.a},b={self.b},k={self.iterations}"

    @classmethod
    def from_text(cls, text: str) -> "CatMapKey":
        fields = {}
        for part in text.strip().split(","):
            name, _, value = part.partition("=")
            if not _:
                raise ValidationError(f"bad key field {part!r}")
            fields[name.strip()] = value.strip()
        try:
            return cls(
                grid_size=int(fields["N"]),
                a=int(fields["a"]),
                b=int(fields["b"]),
                iterations=int(fields["k"]),
            )
        except KeyError as missing:
            raise ValidationError(f"key text missing field {missing}") from None


def transform_matrix(key: CatMapKey) -> tuple[int, int, int, int]:
    """Single-iteration matrix (m00, m01, m10, m11) reduced mod N."""
    n = key.grid_size
    return (1 % n, key.b % n, key.a % n, (key.a * key.b + 1) % n)


def inverse_matrix(key: CatMapKey) -> tuple[int, int, int, int]:
    """Inverse single-iteration matrix [[a*b+1, -b], [-a, 1]] mod N."""
    n = key.grid_size
    return ((key.a * key.b + 1) % n, -key.b % n, -key.a % n, 1 % n)


def _mat_mul(u, v, n):
    return (
        (u[0] * v[0] + u[1] * v[2]) % n,
        (u[0] * v[1] + u[1] * v[3]) % n,
        (u[2] * v[0] + u[3] * v[2]) % n,
        (u[2] * v[1] + u[3] * v[3]) % n,
    )


def _mat_pow(m, k, n):
    result = (1 % n, 0, 0, 1 % n)
    base = m
    while k:
        if k & 1:
            result = _mat_mul(result, base, n)
        base = _mat_mul(base, base, n)
        k >>= 1
    return result


def _apply(m, point, n):
    x, y = point
    return ((m[0] * x + m[1] * y) % n, (m[2] * x + m[3] * y) % n)


def cat_map_forward(point: tuple[int, int], key: CatMapKey) -> tuple[int, int]:
    """Image of a grid point under k iterations of the map."""
    n = key.grid_size
    m = _mat_pow(transform_matrix(key), key.iterations, n)
    return _apply(m, (point[0] % n, point[1] % n), n)


def cat_map_inverse(point: tuple[int, int], key: CatMapKey) -> tuple[int, int]:
    """Preimage of a grid point: inverts k iterations exactly."""
    n = key.grid_size
    m = _mat_pow(inverse_matrix(key), key.iterations, n)
    return _apply(m, (point[0] % n, point[1] % n), n)


def grid_permutation(key: CatMapKey, inverse: bool = False) -> np.ndarray:
    """Flat destination index for every grid point.

    Returns int64 array P of length N*N with P[y*N + x] = y'*N + x' where
    (x', y') is the (inverse) image of (x, y). P is a permutation of
    range(N*N).
    """
    n = key.grid_size
    m = inverse_matrix(key) if inverse else transform_matrix(key)
    m = _mat_pow(m, key.iterations, n)
    x, y = np.meshgrid(np.arange(n, dtype=np.int64), np.arange(n, dtype=np.int64))
    nx = (m[0] * x + m[1] * y) % n
    ny = (m[2] * x + m[3] * y) % n
    return (ny * n + nx).ravel()


def period(key: CatMapKey, cap: int | None = None) -> int:
    """Smallest P >= 1 with P iterations equal to the identity permutation.

    Found by iterating the 2x2 matrix mod N; the key's own iteration count
    is ignored. Raises PeriodLimitError beyond `cap` (default 3*N, the
    classic-map bound).
    """
    n = key.grid_size
    if cap is None:
        cap = 3 * n
    m = transform_matrix(key)
    identity = (1 % n, 0, 0, 1 % n)
    cur = m
    steps = 1
    while cur != identity:
        if steps >= cap:
            raise PeriodLimitError(
                f"period of {key.to_text()} exceeds cap {cap}"
            )
        cur = _mat_mul(cur, m, n)
        steps += 1
    return steps
