"""Row-major integer coding of symmetric index pairs.

The resampling process and the samplers address the upper triangle through
flat codes so orderings, prefixes and set membership are integer operations.
Two layouts are used: ``i <= j`` including the diagonal (the resampling
state space, M = n(n+1)/2 slots) and strict ``i < j`` (off-diagonal-only
ensembles, n(n-1)/2 slots).
"""

from __future__ import annotations

import numpy as np


def pair_count(n: int) -> int:
    return n * (n + 1) // 2


def offdiag_count(n: int) -> int:
    return n * (n - 1) // 2


def encode_pair(i, j, n: int):
    """Code of (i, j) with 0 <= i <= j < n, row-major in the upper triangle."""
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    code = i * n - (i * (i - 1)) // 2 + (j - i)
    return code if code.ndim else int(code)


def decode_pair(code, n: int):
    """Inverse of :func:`encode_pair`, vectorized."""
    c = np.asarray(code, dtype=np.int64)
    scalar = c.ndim == 0
    c = np.atleast_1d(c)
    # Row start offsets are offset(i) = i*n - i*(i-1)/2; invert the quadratic
    # in floating point, then correct the rare off-by-one from rounding.
    b = 2 * n + 1
    i = np.floor((b - np.sqrt(b * b - 8.0 * c.astype(np.float64))) / 2.0).astype(np.int64)
    np.clip(i, 0, n - 1, out=i)
    for _ in range(3):
        off = i * n - (i * (i - 1)) // 2
        too_high = off > c
        i[too_high] -= 1
        off_next = (i + 1) * n - ((i + 1) * i) // 2
        too_low = (off_next <= c) & (i < n - 1)
        i[too_low] += 1
        if not (too_high.any() or too_low.any()):
            break
    off = i * n - (i * (i - 1)) // 2
    j = i + (c - off)
    if scalar:
        return int(i[0]), int(j[0])
    return i, j


def encode_offdiag(i, j, n: int):
    """Code of (i, j) with 0 <= i < j < n, row-major among strict pairs."""
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    code = i * (n - 1) - (i * (i - 1)) // 2 + (j - i - 1)
    return code if code.ndim else int(code)


def decode_offdiag(code, n: int):
    """Inverse of :func:`encode_offdiag`, vectorized."""
    c = np.asarray(code, dtype=np.int64)
    scalar = c.ndim == 0
    c = np.atleast_1d(c)
    b = 2 * n - 1
    i = np.floor((b - np.sqrt(b * b - 8.0 * c.astype(np.float64))) / 2.0).astype(np.int64)
    np.clip(i, 0, n - 2, out=i)
    for _ in range(3):
        off = i * (n - 1) - (i * (i - 1)) // 2
        too_high = off > c
        i[too_high] -= 1
        off_next = (i + 1) * (n - 1) - ((i + 1) * i) // 2
        too_low = (off_next <= c) & (i < n - 2)
        i[too_low] += 1
        if not (too_high.any() or too_low.any()):
            break
    off = i * (n - 1) - (i * (i - 1)) // 2
    j = i + 1 + (c - off)
    if scalar:
        return int(i[0]), int(j[0])
    return i, j


def is_diagonal(code, n: int):
    """True where the i <= j code addresses a diagonal slot."""
    i, j = decode_pair(code, n)
    return i == j
