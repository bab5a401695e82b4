"""Sparse random symmetric ensembles.

The centered model fills each upper-triangle slot (diagonal included, sampled
like any other slot) with ``x * y / q`` where ``x`` follows a centered
unit-variance entry law and ``y`` is Bernoulli(q^2/n).  Entries then have mean
zero and variance 1/n, and higher moments grow like q^(2-2k)/n.  The
Erdos-Renyi adjacency model puts ``zeta/q`` on each off-diagonal slot with
probability q^2/n (zero diagonal), where ``zeta = (1 - q^2/n)^(-1/2)`` makes
the off-diagonal variance exactly 1/n; its centering splits off a rank-one
shift ``f ee*`` and a scalar ``-a I``.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from ._pairs import (
    decode_offdiag,
    decode_pair,
    encode_pair,
    offdiag_count,
    pair_count,
)
from .errors import ValidationError

LAW_KINDS = ("rademacher", "gaussian", "uniform-symmetric")
MODELS = ("centered-sparse", "er-adjacency", "er-centered")

_SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class EntryLaw:
    """Centered, unit-variance law for the non-vanishing entry factor x.

    ``subgaussian_param`` is recorded metadata only; the shipped laws are all
    sub-Gaussian and the samplers never branch on it.
    """

    kind: str = "rademacher"
    subgaussian_param: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in LAW_KINDS:
            raise ValidationError(f"unknown entry law {self.kind!r}; expected one of {LAW_KINDS}")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "rademacher":
            return rng.integers(0, 2, size=size).astype(np.float64) * 2.0 - 1.0
        if self.kind == "gaussian":
            x = rng.standard_normal(size)
        else:  # uniform on [-sqrt(3), sqrt(3)] has unit variance
            x = rng.uniform(-_SQRT3, _SQRT3, size=size)
        # An exact floating-point zero would be dropped by the sparse
        # container and corrupt the Bernoulli count; redraw (probability
        # ~2^-53 per entry).
        while True:
            zero = x == 0.0
            if not zero.any():
                return x
            x[zero] = rng.standard_normal(int(zero.sum())) if self.kind == "gaussian" else rng.uniform(
                -_SQRT3, _SQRT3, size=int(zero.sum())
            )

    def fourth_moment(self) -> float:
        return {"rademacher": 1.0, "gaussian": 3.0, "uniform-symmetric": 9.0 / 5.0}[self.kind]


@dataclass(frozen=True)
class EnsembleSpec:
    n: int
    q: float
    law: EntryLaw = field(default_factory=EntryLaw)
    model: str = "centered-sparse"

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValidationError(f"matrix size must be >= 2, got {self.n}")
        if self.model not in MODELS:
            raise ValidationError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if not (0.0 < self.q <= math.sqrt(self.n)):
            raise ValidationError(
                f"sparsity parameter q must lie in (0, sqrt(n)] = (0, {math.sqrt(self.n):.6g}], got {self.q}"
            )

    @property
    def slot_probability(self) -> float:
        return self.q * self.q / self.n

    @property
    def zeta(self) -> float:
        """Variance normalizer of the adjacency model."""
        p = self.slot_probability
        if p >= 1.0:
            raise ValidationError("er models need q^2/n < 1")
        return 1.0 / math.sqrt(1.0 - p)


class SparseSymMatrix:
    """Symmetric matrix stored as its upper-triangle nonzeros.

    Entries are keyed by the row-major ``i <= j`` pair code, kept sorted, with
    no duplicates and no explicit zeros; the lower triangle is implied.
    """

    __slots__ = ("n", "q", "model", "seed_label", "codes", "values", "_csr", "_frob_sq")

    def __init__(
        self,
        n: int,
        codes: np.ndarray,
        values: np.ndarray,
        q: float,
        model: str = "centered-sparse",
        seed_label: str = "",
    ) -> None:
        codes = np.asarray(codes, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if codes.shape != values.shape or codes.ndim != 1:
            raise ValidationError("codes and values must be matching one-dimensional arrays")
        if codes.size:
            if codes.min() < 0 or codes.max() >= pair_count(n):
                raise ValidationError("pair code out of range for matrix size")
            order = np.argsort(codes, kind="stable")
            codes = codes[order]
            values = values[order]
            if np.any(np.diff(codes) == 0):
                raise ValidationError("duplicate upper-triangle entries")
            if np.any(values == 0.0):
                raise ValidationError("explicit zero entries are not stored")
        self.n = int(n)
        self.q = float(q)
        self.model = model
        self.seed_label = seed_label
        self.codes = codes
        self.values = values
        self._csr = None
        self._frob_sq = None

    @classmethod
    def from_dict(cls, n: int, entries: dict[int, float], q: float, model: str = "centered-sparse",
                  seed_label: str = "") -> "SparseSymMatrix":
        codes = np.fromiter(entries.keys(), dtype=np.int64, count=len(entries))
        values = np.fromiter(entries.values(), dtype=np.float64, count=len(entries))
        return cls(n, codes, values, q=q, model=model, seed_label=seed_label)

    @property
    def nnz_upper(self) -> int:
        return int(self.codes.size)

    def entries_dict(self) -> dict[int, float]:
        return dict(zip(self.codes.tolist(), self.values.tolist()))

    def entry(self, i: int, j: int) -> float:
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise ValidationError(f"index ({i}, {j}) out of range for n={self.n}")
        if i > j:
            i, j = j, i
        code = encode_pair(i, j, self.n)
        pos = np.searchsorted(self.codes, code)
        if pos < self.codes.size and self.codes[pos] == code:
            return float(self.values[pos])
        return 0.0

    def index_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        i, j = decode_pair(self.codes, self.n)
        return np.atleast_1d(i), np.atleast_1d(j)

    def csr(self) -> sp.csr_matrix:
        if self._csr is None:
            i, j = self.index_arrays()
            off = i != j
            rows = np.concatenate([i, j[off]])
            cols = np.concatenate([j, i[off]])
            vals = np.concatenate([self.values, self.values[off]])
            self._csr = sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))
        return self._csr

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.csr() @ x

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        i, j = self.index_arrays()
        a[i, j] = self.values
        a[j, i] = self.values
        return a

    def frobenius_sq(self) -> float:
        """Squared Frobenius norm of the full symmetric matrix."""
        if self._frob_sq is None:
            i, j = self.index_arrays()
            w = np.where(i == j, 1.0, 2.0)
            self._frob_sq = float(np.sum(w * self.values**2))
        return self._frob_sq

    def same_entries(self, other: "SparseSymMatrix") -> bool:
        return (
            self.n == other.n
            and self.codes.size == other.codes.size
            and bool(np.array_equal(self.codes, other.codes))
            and bool(np.array_equal(self.values, other.values))
        )


class CenteredER:
    """Centered adjacency matrix, stored as the sparse part plus scalars.

    The raw adjacency decomposes as ``A = Aring + f ee* - a I`` with
    ``f = zeta q``, ``a = f/n`` and ``e`` the unit flat vector, so the
    centered part is represented implicitly: ``Aring = A - f ee* + a I``.
    """

    __slots__ = ("adjacency", "f", "a")

    def __init__(self, adjacency: SparseSymMatrix, f: float, a: float) -> None:
        self.adjacency = adjacency
        self.f = float(f)
        self.a = float(a)

    @property
    def n(self) -> int:
        return self.adjacency.n

    @property
    def q(self) -> float:
        return self.adjacency.q

    def matvec(self, x: np.ndarray) -> np.ndarray:
        n = self.n
        return self.adjacency.matvec(x) - (self.f / n) * x.sum() + self.a * x

    def to_dense(self) -> np.ndarray:
        n = self.n
        a = self.adjacency.to_dense()
        a -= self.f / n
        a[np.diag_indices(n)] += self.a
        return a

    def entry(self, i: int, j: int) -> float:
        raw = self.adjacency.entry(i, j)
        return raw - self.f / self.n + (self.a if i == j else 0.0)

    def frobenius_sq(self) -> float:
        # Off-diagonal entries are (value - a) on edges and -a on non-edges;
        # the diagonal is exactly zero (adjacency diagonal is empty and the
        # shift cancels there).
        n = self.n
        m = self.adjacency
        edges = 2 * m.nnz_upper
        holes = n * n - n - edges
        return float(2.0 * np.sum((m.values - self.a) ** 2) + holes * self.a**2)


@dataclass(frozen=True)
class CorrectionTerm:
    """Normalized squared Frobenius fluctuation, ``|H|_F^2 / n - 1``."""

    value: float
    n: int

    def __post_init__(self) -> None:
        if self.value < -1.0:
            raise ValidationError(f"correction term below its attainable floor -1: {self.value}")


def sample_sparse(spec: EnsembleSpec, rng: np.random.Generator, seed_label: str = "") -> SparseSymMatrix:
    """Draw the centered sparse model: every ``i <= j`` slot gets ``x y / q``."""
    if spec.model != "centered-sparse":
        raise ValidationError(f"sample_sparse needs model 'centered-sparse', got {spec.model!r}")
    m = pair_count(spec.n)
    p = min(spec.slot_probability, 1.0)
    count = int(rng.binomial(m, p))
    codes = rng.choice(m, size=count, replace=False)
    x = spec.law.sample(rng, count)
    return SparseSymMatrix(
        spec.n, codes, x / spec.q, q=spec.q, model=spec.model, seed_label=seed_label
    )


def sample_er(spec: EnsembleSpec, rng: np.random.Generator, seed_label: str = "") -> SparseSymMatrix:
    """Draw the adjacency model: off-diagonal slots get ``zeta/q``, zero diagonal."""
    if spec.model not in ("er-adjacency", "er-centered"):
        raise ValidationError(f"sample_er needs an er model, got {spec.model!r}")
    n = spec.n
    zeta = spec.zeta
    m_off = offdiag_count(n)
    count = int(rng.binomial(m_off, spec.slot_probability))
    flat = rng.choice(m_off, size=count, replace=False)
    i, j = decode_offdiag(flat, n)
    codes = encode_pair(np.atleast_1d(i), np.atleast_1d(j), n)
    values = np.full(count, zeta / spec.q)
    return SparseSymMatrix(n, codes, values, q=spec.q, model="er-adjacency", seed_label=seed_label)


def center_er(a: SparseSymMatrix, spec: EnsembleSpec) -> tuple[CenteredER, float, float]:
    """Split the adjacency into its centered part plus the scalars (f, a)."""
    if a.model != "er-adjacency":
        raise ValidationError("center_er expects an adjacency-model matrix")
    f = spec.zeta * spec.q
    shift = f / spec.n
    return CenteredER(a, f, shift), f, shift


def correction_term(h: SparseSymMatrix | CenteredER) -> CorrectionTerm:
    """Trace fluctuation ``Tr(H^2)/n - 1`` of the full symmetric matrix."""
    return CorrectionTerm(value=h.frobenius_sq() / h.n - 1.0, n=h.n)


# --- line-oriented serialization ------------------------------------------
#
# Header "N q model seed", then one "i j value" line per stored upper-triangle
# entry in code order.  Floats are written with repr so the round trip is
# bit-exact.


def matrix_to_text(h: SparseSymMatrix) -> str:
    i, j = h.index_arrays()
    lines = [f"{h.n} {h.q!r} {h.model} {h.seed_label or '-'}"]
    lines.extend(f"{ii} {jj} {v!r}" for ii, jj, v in zip(i.tolist(), j.tolist(), h.values.tolist()))
    return "\n".join(lines) + "\n"


def matrix_from_text(text: str) -> SparseSymMatrix:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValidationError("empty matrix file")
    head = lines[0].split()
    if len(head) != 4:
        raise ValidationError(f"malformed header {lines[0]!r}; expected 'N q model seed'")
    n = int(head[0])
    q = float(head[1])
    model = head[2]
    seed_label = "" if head[3] == "-" else head[3]
    rows, cols, vals = [], [], []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 3:
            raise ValidationError(f"malformed entry line {ln!r}")
        rows.append(int(parts[0]))
        cols.append(int(parts[1]))
        vals.append(float(parts[2]))
    rows_a = np.asarray(rows, dtype=np.int64)
    cols_a = np.asarray(cols, dtype=np.int64)
    if rows_a.size and np.any(rows_a > cols_a):
        raise ValidationError("entries must address the upper triangle (i <= j)")
    codes = encode_pair(rows_a, cols_a, n) if rows_a.size else np.empty(0, dtype=np.int64)
    return SparseSymMatrix(n, np.atleast_1d(codes), np.asarray(vals), q=q, model=model, seed_label=seed_label)


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_matrix(h: SparseSymMatrix, path: str | os.PathLike) -> None:
    atomic_write_text(path, matrix_to_text(h))


def read_matrix(path: str | os.PathLike) -> SparseSymMatrix:
    with open(path, "r") as fh:
        return matrix_from_text(fh.read())
