"""Eigensolvers and eigenvector statistics.

Dense full-spectrum solves go through LAPACK below a size cap.  The top-m
path is a thick-restart Krylov iteration with full reorthogonalization: the
search block (warm start or random) is extended one matrix-vector product at
a time, Rayleigh-Ritz is applied on the accumulated basis, and the best Ritz
block seeds the next cycle.  Residual norms are computed exactly from stored
products, never estimated, and running out of budget raises instead of
returning silently wrong pairs.

Eigenvectors are canonicalized so the largest-magnitude coordinate is
positive (ties broken by the lowest index); all overlap statistics are sign
invariant anyway.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EigsolverError, ValidationError

DENSE_CAP = 4096
DEGENERATE_GAP = 1e-9
_UNIT_TOL = 1e-10
_RESIDUAL_TOL = 1e-8


class _Operator:
    """Uniform matvec wrapper over ndarray / sparse containers."""

    def __init__(self, h) -> None:
        if isinstance(h, np.ndarray):
            if h.ndim != 2 or h.shape[0] != h.shape[1]:
                raise ValidationError("dense operator must be a square matrix")
            self.n = h.shape[0]
            self._mv = lambda x: h @ x
            self._dense = h
        elif hasattr(h, "matvec") and hasattr(h, "n"):
            self.n = int(h.n)
            self._mv = h.matvec
            self._dense = None
            self._src = h
        else:
            raise ValidationError(f"cannot interpret {type(h)!r} as a symmetric operator")

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self._mv(x)

    def dense(self) -> np.ndarray:
        if self._dense is None:
            self._dense = self._src.to_dense()
        return self._dense


class NegatedOperator:
    """Flips the spectrum so the bottom edge can be solved as a top edge."""

    def __init__(self, h) -> None:
        self._op = _Operator(h)
        self.n = self._op.n

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return -self._op.matvec(x)

    def to_dense(self) -> np.ndarray:
        return -self._op.dense()


@dataclass
class EigenPairs:
    """Eigenvalues in descending order with canonically signed unit vectors."""

    values: np.ndarray
    vectors: np.ndarray  # (n, m), column p pairs with values[p]
    method: str  # "dense-full" | "iterative-topm"
    residuals: np.ndarray | None = None
    matvecs: int = 0

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def m(self) -> int:
        return self.vectors.shape[1]

    def vector(self, index: int) -> np.ndarray:
        """Eigenvector by 1-based spectral rank (1 = largest eigenvalue)."""
        if not 1 <= index <= self.m:
            raise ValidationError(f"eigenvector rank {index} not among the {self.m} computed pairs")
        return self.vectors[:, index - 1]


@dataclass(frozen=True)
class GapStats:
    """Consecutive spectral gaps by 1-based index, with degeneracy flags."""

    indices: tuple[int, ...]
    gaps: np.ndarray
    degenerate: np.ndarray  # gap below DEGENERATE_GAP

    @property
    def any_degenerate(self) -> bool:
        return bool(self.degenerate.any())


def canonical_sign(v: np.ndarray) -> np.ndarray:
    idx = int(np.argmax(np.abs(v)))
    return -v if v[idx] < 0 else v


def _finalize(values: np.ndarray, vectors: np.ndarray, method: str,
              residuals: np.ndarray | None, matvecs: int = 0, check: bool = True) -> EigenPairs:
    for p in range(vectors.shape[1]):
        vectors[:, p] = canonical_sign(vectors[:, p])
    if check:
        norms = np.linalg.norm(vectors, axis=0)
        if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
            raise EigsolverError(f"eigenvector norms deviate from 1 by {np.abs(norms - 1.0).max():.3e}")
        if np.any(np.diff(values) > 0):
            raise EigsolverError("eigenvalues not in descending order")
        if residuals is not None:
            allowed = _RESIDUAL_TOL * np.maximum(1.0, np.abs(values))
            if np.any(residuals > allowed):
                raise EigsolverError(
                    f"eigenpair residual {residuals.max():.3e} exceeds {allowed.min():.3e}"
                )
    return EigenPairs(values=values, vectors=vectors, method=method, residuals=residuals, matvecs=matvecs)


def full_spectrum(h, dense_cap: int = DENSE_CAP, check: bool = True) -> EigenPairs:
    """All eigenpairs via a dense solve; refuses sizes above the cap."""
    op = _Operator(h)
    if op.n > dense_cap:
        raise ValidationError(f"dense solve of size {op.n} above cap {dense_cap}; use top_eigs")
    a = op.dense()
    vals, vecs = np.linalg.eigh(a)
    vals = vals[::-1].copy()
    vecs = vecs[:, ::-1].copy()
    residuals = None
    if check:
        residuals = np.linalg.norm(a @ vecs - vecs * vals, axis=0)
    return _finalize(vals, vecs, "dense-full", residuals, check=check)


def top_eigs(
    h,
    m: int = 1,
    warm_start: np.ndarray | None = None,
    tol: float = 1e-10,
    max_matvecs: int = 60000,
    basis_size: int | None = None,
    rng: np.random.Generator | None = None,
) -> EigenPairs:
    """Top-m eigenpairs by thick-restart Krylov iteration.

    ``warm_start`` may hold any number of starting columns (a previous
    solve's vectors); missing columns are filled with seeded random vectors.
    Raises :class:`EigsolverError` when the matvec budget runs out before the
    residual targets ``tol * max(1, |lambda|)`` are met.
    """
    op = _Operator(h)
    n = op.n
    if not 1 <= m <= n:
        raise ValidationError(f"need 1 <= m <= n, got m={m}, n={n}")
    if rng is None:
        rng = np.random.default_rng(0x5EED0F0)
    s = min(n, m + 1)
    b = min(n, basis_size if basis_size is not None else max(4 * m + 16, 32))
    if b < s:
        b = s

    block = np.empty((n, s))
    cols = 0
    if warm_start is not None:
        w = np.atleast_2d(np.asarray(warm_start, dtype=np.float64))
        if w.shape[0] != n:
            w = w.T
        if w.shape[0] != n:
            raise ValidationError("warm start vectors have the wrong length")
        take = min(s, w.shape[1])
        block[:, :take] = w[:, :take]
        cols = take
    if cols < s:
        block[:, cols:] = rng.standard_normal((n, s - cols))

    matvecs = 0
    check_stride = 8
    for _ in range(10000):
        v_cols: list[np.ndarray] = []
        p_cols: list[np.ndarray] = []  # p_cols[i] = A @ v_cols[i]

        def orthonormalized(vec: np.ndarray) -> np.ndarray | None:
            # Two-pass Gram-Schmidt keeps the basis orthonormal to ~eps.
            for _ in range(2):
                for u in v_cols:
                    vec = vec - (u @ vec) * u
            nrm = np.linalg.norm(vec)
            return None if nrm < 1e-12 else vec / nrm

        def ritz():
            v = np.stack(v_cols, axis=1)
            av = np.stack(p_cols, axis=1)
            t = v.T @ av
            t = 0.5 * (t + t.T)
            theta, y = np.linalg.eigh(t)
            theta = theta[::-1]
            y = y[:, ::-1]
            keep = min(s, v.shape[1])
            z = v @ y[:, :keep]
            rz = av @ y[:, :keep] - z * theta[:keep]
            res = np.linalg.norm(rz, axis=0)
            target = tol * np.maximum(1.0, np.abs(theta[:keep]))
            return theta, z, res, target, v.shape[1]

        seeds = [block[:, c].copy() for c in range(s)]
        chain_started = False
        result = None
        while len(v_cols) < b and matvecs < max_matvecs:
            if seeds:
                cand = seeds.pop(0)
            elif p_cols:
                # The Krylov chain grows from the first block column (the
                # dominant unconverged direction) and then from each newly
                # added vector in turn.
                cand = p_cols[0].copy() if not chain_started else p_cols[-1].copy()
                chain_started = True
            else:
                cand = rng.standard_normal(n)
            vec = orthonormalized(cand)
            if vec is None:
                if len(v_cols) >= n:
                    break
                vec = orthonormalized(rng.standard_normal(n))
                if vec is None:
                    break
            v_cols.append(vec)
            p_cols.append(op.matvec(vec))
            matvecs += 1
            filled = len(v_cols)
            if (
                filled >= max(m + 1, s)
                and (filled == s or (filled - s) % check_stride == 0 or filled == b or filled == n)
            ):
                theta, z, res, target, dim = ritz()
                if np.all(res[:m] <= target[:m]) or dim >= n:
                    result = (theta, z, res)
                    break
        if not v_cols:
            raise EigsolverError("top_eigs: empty search space")
        if result is None:
            theta, z, res, target, dim = ritz()
            if np.all(res[:m] <= target[:m]) or dim >= n:
                result = (theta, z, res)
        if result is not None:
            theta, z, res = result
            vals = theta[:m].copy()
            vecs = z[:, :m].copy()
            vecs /= np.linalg.norm(vecs, axis=0)
            return _finalize(vals, vecs, "iterative-topm", res[:m].copy(), matvecs=matvecs)
        if matvecs >= max_matvecs:
            raise EigsolverError(
                f"top_eigs: residual {res[:m].max():.3e} above target after {matvecs} matvecs"
            )
        if z.shape[1] < s:
            z = np.hstack([z, rng.standard_normal((n, s - z.shape[1]))])
        # Seed the next cycle with unconverged Ritz vectors first so the
        # chain works on the direction that still needs progress.
        unconv = [c for c in range(s) if c >= res.size or res[c] > target[c]]
        conv = [c for c in range(s) if c not in unconv]
        block = z[:, unconv + conv]
    raise EigsolverError("top_eigs: cycle limit reached")


def overlap(v: np.ndarray, w: np.ndarray) -> float:
    """|<v, w>| for unit vectors; sign and global-phase invariant."""
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if v.shape != w.shape or v.ndim != 1:
        raise ValidationError("overlap needs two equal-length vectors")
    for u in (v, w):
        if abs(np.linalg.norm(u) - 1.0) > 1e-8:
            raise ValidationError("overlap needs unit vectors (norm within 1e-8 of 1)")
    return min(abs(float(v @ w)), 1.0)


def aligned_inf_dist(v: np.ndarray, w: np.ndarray) -> float:
    """min over sign s of sqrt(n) * ||v - s w||_inf."""
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if v.shape != w.shape or v.ndim != 1:
        raise ValidationError("aligned_inf_dist needs two equal-length vectors")
    scale = np.sqrt(v.size)
    plus = np.max(np.abs(v - w))
    minus = np.max(np.abs(v + w))
    return float(scale * min(plus, minus))


def delocalization_stat(vectors: np.ndarray) -> np.ndarray:
    """sqrt(n) * ||v||_inf per column; order one for flat vectors."""
    vecs = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if vecs.shape[0] == 1:
        vecs = vecs.T
    n = vecs.shape[0]
    return np.sqrt(n) * np.max(np.abs(vecs), axis=0)


def gap_stats(values: np.ndarray, indices: tuple[int, ...] = (1,)) -> GapStats:
    """Gaps ``lambda_i - lambda_(i+1)`` for the requested 1-based indices."""
    values = np.asarray(values, dtype=np.float64)
    if np.any(np.diff(values) > 0):
        raise ValidationError("gap_stats expects eigenvalues in descending order")
    gaps = []
    for i in indices:
        if not (1 <= i and i + 1 <= values.size):
            raise ValidationError(f"gap index {i} needs eigenvalues {i} and {i + 1}")
        gaps.append(values[i - 1] - values[i])
    gaps_arr = np.asarray(gaps)
    return GapStats(indices=tuple(indices), gaps=gaps_arr, degenerate=gaps_arr < DEGENERATE_GAP)
