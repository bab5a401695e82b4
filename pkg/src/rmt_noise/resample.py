"""Entrywise resampling of symmetric matrices.

A trial fixes an independent pair ``(H, H')`` drawn from the same ensemble and
a uniform random ordering of the M = n(n+1)/2 upper-triangle slots.  The
k-step resampled matrix takes its first-k-slots entries from ``H'`` and all
other entries from ``H``, so prefixes are nested: positions, once drawn, never
move as k grows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._pairs import decode_pair, encode_pair, pair_count
from .ensemble import EnsembleSpec, SparseSymMatrix
from .errors import ValidationError

# Above this many slots the full permutation is not materialized; prefixes
# are produced by incremental Fisher-Yates on a sparse swap table instead.
MATERIALIZE_LIMIT = 1 << 24


class PairOrder:
    """Uniform random ordering of the upper-triangle pair codes.

    ``prefix(k)`` returns the first k codes and is nested by construction.  At
    desk scales the permutation is materialized outright; for huge slot counts
    the order is generated lazily, O(touched) in time and memory.  Which path
    is taken depends only on the slot count, never on the data, so a fixed
    (seed, n) always reproduces the same order.
    """

    def __init__(self, n: int, rng: np.random.Generator, materialize_limit: int = MATERIALIZE_LIMIT):
        self.n = int(n)
        self.m = pair_count(n)
        if self.m <= materialize_limit:
            self._perm = rng.permutation(self.m)
            self._pos = None
            self._rng = None
            self._seq = None
            self._swaps = None
        else:
            self._perm = None
            self._pos = {}
            self._rng = rng
            self._seq = []
            self._swaps = {}

    def _extend_lazy(self, k: int) -> None:
        seq, swaps, pos, rng, m = self._seq, self._swaps, self._pos, self._rng, self.m
        while len(seq) < k:
            t = len(seq)
            r = int(rng.integers(t, m))
            vt = swaps.pop(t, t)
            vr = swaps.pop(r, r) if r != t else vt
            if r != t:
                swaps[r] = vt
            seq.append(vr)
            pos[vr] = t

    def prefix(self, k: int) -> np.ndarray:
        """First k pair codes of the ordering."""
        if not 0 <= k <= self.m:
            raise ValidationError(f"prefix length {k} outside [0, {self.m}]")
        if self._perm is not None:
            return self._perm[:k]
        self._extend_lazy(k)
        return np.asarray(self._seq[:k], dtype=np.int64)

    def in_prefix(self, codes, k: int) -> np.ndarray:
        """Membership of pair codes in the first k slots."""
        codes = np.atleast_1d(np.asarray(codes, dtype=np.int64))
        if self._perm is not None:
            if self._pos is None:
                inv = np.empty(self.m, dtype=np.int64)
                inv[self._perm] = np.arange(self.m)
                self._pos = inv
            return self._pos[codes] < k
        self._extend_lazy(k)
        return np.asarray([self._pos.get(int(c), self.m) < k for c in codes], dtype=bool)


@dataclass(frozen=True)
class ResamplePair:
    """An independent matrix pair plus the slot ordering that couples them."""

    base: SparseSymMatrix
    fresh: SparseSymMatrix
    order: PairOrder

    def __post_init__(self) -> None:
        if not (self.base.n == self.fresh.n == self.order.n):
            raise ValidationError("base, fresh and order must share the matrix size")
        if self.base.model != self.fresh.model:
            raise ValidationError("base and fresh must come from the same model")


@dataclass(frozen=True)
class SingleResampleQuantities:
    """Trace and entry increments of a one-slot resample.

    ``q_st = (h^2 - h''^2)(1 + 1[s != t]) / n`` is the change of the
    correction term and ``z_st = (h - h'')(1 + 1[s != t])`` the entry
    difference, with the indicator factor 1 on the diagonal and 2 off it.
    """

    pair: tuple[int, int]
    q_st: float
    z_st: float


def make_pair_order(n: int, rng: np.random.Generator) -> PairOrder:
    return PairOrder(n, rng)


def make_resample_pair(base: SparseSymMatrix, fresh: SparseSymMatrix, order: PairOrder) -> ResamplePair:
    return ResamplePair(base=base, fresh=fresh, order=order)


def _lookup_many(mat: SparseSymMatrix, codes: np.ndarray) -> np.ndarray:
    """Entry values at the given pair codes, 0.0 where vacant (vectorized)."""
    if mat.codes.size == 0:
        return np.zeros(codes.shape)
    pos = np.searchsorted(mat.codes, codes)
    safe = np.minimum(pos, mat.codes.size - 1)
    hit = mat.codes[safe] == codes
    return np.where(hit, mat.values[safe], 0.0)


def resample_to(pair: ResamplePair, k: int) -> SparseSymMatrix:
    """The k-step matrix: first-k slots from ``fresh``, the rest from ``base``."""
    if not 0 <= k <= pair.order.m:
        raise ValidationError(f"need 0 <= k <= {pair.order.m}")
    base, fresh = pair.base, pair.fresh
    keep = ~pair.order.in_prefix(base.codes, k)
    take = pair.order.in_prefix(fresh.codes, k)
    codes = np.concatenate([base.codes[keep], fresh.codes[take]])
    values = np.concatenate([base.values[keep], fresh.values[take]])
    return SparseSymMatrix(base.n, codes, values, q=base.q, model=base.model, seed_label=base.seed_label)


def resample_diffs(pair: ResamplePair, k_lo: int, k_hi: int) -> list[tuple[int, float]]:
    """Entry updates turning the k_lo-step matrix into the k_hi-step one.

    Returns ``(code, new_value)`` tuples where 0.0 means the slot becomes
    vacant; slots where base and fresh agree are omitted.
    """
    if not 0 <= k_lo <= k_hi <= pair.order.m:
        raise ValidationError(f"need 0 <= k_lo <= k_hi <= {pair.order.m}")
    codes = pair.order.prefix(k_hi)[k_lo:]
    if codes.size == 0:
        return []
    old = _lookup_many(pair.base, codes)
    new = _lookup_many(pair.fresh, codes)
    mask = old != new
    return list(zip(codes[mask].tolist(), new[mask].tolist()))


def apply_diffs(entries: dict[int, float], diffs: list[tuple[int, float]]) -> None:
    """In-place update of an entry dict with the output of resample_diffs."""
    for code, new in diffs:
        if new == 0.0:
            entries.pop(code, None)
        else:
            entries[code] = new


def single_resample(
    spec: EnsembleSpec, h: SparseSymMatrix, s: int, t: int, rng: np.random.Generator
) -> tuple[SparseSymMatrix, SingleResampleQuantities]:
    """Redraw the single slot (s, t) from the ensemble's entry distribution.

    Diagonal slots of adjacency-model matrices are structurally zero, so
    resampling them is a no-op (the slot still exists in the ordering).
    """
    if not (0 <= s < h.n and 0 <= t < h.n):
        raise ValidationError(f"slot ({s}, {t}) out of range for n={h.n}")
    if s > t:
        s, t = t, s
    if h.model == "er-adjacency" and s == t:
        return h, SingleResampleQuantities(pair=(s, t), q_st=0.0, z_st=0.0)
    y = rng.random() < spec.slot_probability
    if not y:
        new = 0.0
    elif h.model == "er-adjacency":
        new = spec.zeta / spec.q
    else:
        new = float(spec.law.sample(rng, 1)[0]) / spec.q
    entries = h.entries_dict()
    code = encode_pair(s, t, h.n)
    old = entries.get(code, 0.0)
    if new == 0.0:
        entries.pop(code, None)
    else:
        entries[code] = new
    resampled = SparseSymMatrix.from_dict(h.n, entries, q=h.q, model=h.model, seed_label=h.seed_label)
    return resampled, _quantities(h.n, s, t, old, new)


def single_resample_quantities(
    h: SparseSymMatrix, h_st: SparseSymMatrix, s: int, t: int
) -> SingleResampleQuantities:
    """Recover the one-slot increments from a matrix pair differing at (s, t)."""
    if h.n != h_st.n:
        raise ValidationError("matrices must share the size")
    if s > t:
        s, t = t, s
    code = encode_pair(s, t, h.n)
    mask_a = h.codes != code
    mask_b = h_st.codes != code
    if not (
        np.array_equal(h.codes[mask_a], h_st.codes[mask_b])
        and np.array_equal(h.values[mask_a], h_st.values[mask_b])
    ):
        raise ValidationError("matrices differ outside the declared slot")
    return _quantities(h.n, s, t, h.entry(s, t), h_st.entry(s, t))


def _quantities(n: int, s: int, t: int, old: float, new: float) -> SingleResampleQuantities:
    factor = 1.0 if s == t else 2.0
    return SingleResampleQuantities(
        pair=(s, t),
        q_st=factor * (old * old - new * new) / n,
        z_st=factor * (old - new),
    )
