"""Resolvent probes and spectral-window diagnostics.

``probe`` solves shifted complex linear systems column by column (dense LU
below the size cap, sparse LU above) and verifies every column's residual;
the dense eigendecomposition route is kept separate as the independent cross
check and as the fast path for full-matrix imaginary-part scans, where all
n^2 entries of Im R are needed at many spectral parameters.

Window conventions: energy windows are centered at the model edge with half
width n^(delta - 2/3) and the spectral resolution is eta = n^(-delta - 2/3);
delta defaults to 0.05 and windows are sampled at 17 energies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .edge_model import EdgeModel, _m_star_values, edge_location
from .errors import ValidationError
from .spectral import EigenPairs, _Operator

DENSE_CAP = 4096
DEFAULT_DELTA = 0.05
WINDOW_ENERGIES = 17
_COLUMN_RESIDUAL = 1e-9


@dataclass
class ResolventProbe:
    """Columns of R(z) = (H - z)^(-1) for one matrix and one z."""

    z: complex
    n: int
    columns: dict[int, np.ndarray]
    residuals: dict[int, float]
    eigen_m: complex | None = None

    def entry(self, i: int, j: int) -> complex:
        if j in self.columns:
            return complex(self.columns[j][i])
        if i in self.columns:  # R is complex symmetric for real symmetric H
            return complex(self.columns[i][j])
        raise ValidationError(f"probe holds no column for entry ({i}, {j})")

    def row(self, i: int) -> np.ndarray:
        if i not in self.columns:
            raise ValidationError(f"probe holds no full row/column for index {i}")
        return self.columns[i]

    def m(self) -> complex:
        if len(self.columns) == self.n:
            diag = np.asarray([self.columns[j][j] for j in range(self.n)])
            return complex(diag.mean())
        if self.eigen_m is not None:
            return self.eigen_m
        raise ValidationError("m(z) needs either all columns or precomputed eigenvalues")


def probe(
    h,
    z: complex,
    columns,
    dense_cap: int = DENSE_CAP,
    values: np.ndarray | None = None,
) -> ResolventProbe:
    """Solve (H - z) x = e_j for the requested columns, residual-checked.

    ``values`` (eigenvalues of H), when given, provide m(z) without probing
    the whole diagonal.
    """
    z = complex(z)
    if z.imag == 0.0:
        raise ValidationError("probe needs a complex shift (Im z != 0)")
    op = _Operator(h)
    n = op.n
    cols = sorted({int(c) for c in columns})
    if cols and (cols[0] < 0 or cols[-1] >= n):
        raise ValidationError(f"column index out of range for n={n}")

    out: dict[int, np.ndarray] = {}
    res: dict[int, float] = {}
    if n <= dense_cap:
        a = op.dense().astype(np.complex128)
        a[np.diag_indices(n)] -= z
        lu, piv = sla.lu_factor(a, check_finite=False)
        rhs = np.zeros((n, len(cols)), dtype=np.complex128)
        for k, j in enumerate(cols):
            rhs[j, k] = 1.0
        x = sla.lu_solve((lu, piv), rhs, check_finite=False)
        r = rhs - a @ x
        bad = np.linalg.norm(r, axis=0) > _COLUMN_RESIDUAL
        if bad.any():  # one step of iterative refinement
            x[:, bad] += sla.lu_solve((lu, piv), r[:, bad], check_finite=False)
            r = rhs - a @ x
        norms = np.linalg.norm(r, axis=0)
        for k, j in enumerate(cols):
            if norms[k] > _COLUMN_RESIDUAL:
                raise ValidationError(
                    f"resolvent column {j} residual {norms[k]:.3e} above {_COLUMN_RESIDUAL}"
                )
            out[j] = x[:, k]
            res[j] = float(norms[k])
    else:
        mat = sp.csc_matrix(op.dense()) if not hasattr(h, "csr") else h.csr().tocsc()
        shifted = (mat.astype(np.complex128) - z * sp.identity(n, format="csc", dtype=np.complex128)).tocsc()
        solver = spla.splu(shifted)
        for j in cols:
            e = np.zeros(n, dtype=np.complex128)
            e[j] = 1.0
            x = solver.solve(e)
            r = e - shifted @ x
            nrm = float(np.linalg.norm(r))
            if nrm > _COLUMN_RESIDUAL:
                x += solver.solve(r)
                nrm = float(np.linalg.norm(e - shifted @ x))
            if nrm > _COLUMN_RESIDUAL:
                raise ValidationError(f"resolvent column {j} residual {nrm:.3e} above {_COLUMN_RESIDUAL}")
            out[j] = x
            res[j] = nrm
    eigen_m = complex(np.mean(1.0 / (np.asarray(values) - z))) if values is not None else None
    return ResolventProbe(z=z, n=n, columns=out, residuals=res, eigen_m=eigen_m)


def ward_check(pr: ResolventProbe, pairs) -> float:
    """Max relative Ward-identity residual over the given (i, j) pairs.

    For each pair, ``sum_l R_il conj(R_jl)`` must equal ``Im R_ij / Im z``;
    the residual is normalized by the left side plus a 1e-30 floor.
    """
    eta = pr.z.imag
    worst = 0.0
    for i, j in pairs:
        row_i = pr.row(i)
        row_j = pr.row(j)
        lhs = complex(np.sum(row_i * np.conj(row_j)))
        rhs = pr.entry(i, j).imag / eta
        rel = abs(lhs - rhs) / (abs(lhs) + 1e-30)
        worst = max(worst, rel)
    return worst


# --- full-matrix spectral reconstructions ----------------------------------


def _weights(values: np.ndarray, z: complex) -> tuple[np.ndarray, np.ndarray]:
    d = (values - z.real) ** 2 + z.imag**2
    return (values - z.real) / d, z.imag / d


def imag_resolvent_full(eigs: EigenPairs, z: complex) -> np.ndarray:
    """Im R(z) as a dense matrix from a full eigendecomposition."""
    _, wi = _weights(eigs.values, z)
    v = eigs.vectors
    return (v * wi) @ v.T


def resolvent_full(eigs: EigenPairs, z: complex) -> np.ndarray:
    wr, wi = _weights(eigs.values, z)
    v = eigs.vectors
    return (v * wr) @ v.T + 1j * ((v * wi) @ v.T)


def m_empirical(values: np.ndarray, z: complex) -> complex:
    return complex(np.mean(1.0 / (np.asarray(values) - z)))


# --- window helpers ----------------------------------------------------------


def window_energies(n: int, delta: float, center: float, count: int = WINDOW_ENERGIES) -> tuple[np.ndarray, float]:
    half = n ** (delta - 2.0 / 3.0)
    eta = n ** (-delta - 2.0 / 3.0)
    return center + np.linspace(-half, half, count), eta


# --- diagnostics -------------------------------------------------------------


@dataclass(frozen=True)
class LocalLawReport:
    zs: np.ndarray
    residuals: np.ndarray   # |m_emp - m_star|
    bounds: np.ndarray      # 1/(N eta) + q^-3 + (|kappa|+eta)^(1/4) (1/(N eta) + q^-3)^(1/2)
    ratios: np.ndarray
    max_ratio: float


def local_law_residual(values: np.ndarray, model: EdgeModel, grid) -> LocalLawReport:
    """Empirical-vs-model Stieltjes residuals against the target error profile.

    ``grid`` holds (kappa, eta) offsets from the model edge; ``values`` is the
    full spectrum of the probed matrix.
    """
    if model.n is None or model.q is None:
        raise ValidationError("local_law_residual needs a model carrying n and q")
    n, q = model.n, model.q
    edge = edge_location(model)
    grid = [(float(k), float(e)) for (k, e) in grid]
    if any(e <= 0 for _, e in grid):
        raise ValidationError("grid resolutions eta must be positive")
    zs = np.asarray([edge + k + 1j * e for k, e in grid])
    m_emp = np.asarray([m_empirical(values, z) for z in zs])
    m_mod = _m_star_values(model, zs)
    residuals = np.abs(m_emp - m_mod)
    base = np.asarray([1.0 / (n * e) + q**-3 for _, e in grid])
    kap = np.asarray([abs(k) + e for k, e in grid])
    bounds = base + kap**0.25 * np.sqrt(base)
    ratios = residuals / bounds
    return LocalLawReport(zs=zs, residuals=residuals, bounds=bounds, ratios=ratios,
                          max_ratio=float(ratios.max()))


@dataclass(frozen=True)
class EntryLawReport:
    energies: np.ndarray
    eta: float
    max_offdiag_dev: float   # max_ij | |R_ij| - delta_ij |
    max_imag: float          # max_ij |Im R_ij|
    offdiag_norm: float      # 1/q + 1/(N eta)
    imag_norm: float         # 1/(N eta)
    normalized_dev: float
    normalized_imag: float


def entry_law_residual(eigs: EigenPairs, model: EdgeModel, delta: float = DEFAULT_DELTA) -> EntryLawReport:
    """Entry-size scan of R over the edge window at resolution eta."""
    if model.n is None or model.q is None:
        raise ValidationError("entry_law_residual needs a model carrying n and q")
    n, q = model.n, model.q
    energies, eta = window_energies(n, delta, edge_location(model))
    eye = np.eye(n)
    dev = 0.0
    imag = 0.0
    for e in energies:
        r = resolvent_full(eigs, complex(e, eta))
        dev = max(dev, float(np.abs(np.abs(r) - eye).max()))
        imag = max(imag, float(np.abs(r.imag).max()))
    offdiag_norm = 1.0 / q + 1.0 / (n * eta)
    imag_norm = 1.0 / (n * eta)
    return EntryLawReport(
        energies=energies,
        eta=eta,
        max_offdiag_dev=dev,
        max_imag=imag,
        offdiag_norm=offdiag_norm,
        imag_norm=imag_norm,
        normalized_dev=dev / offdiag_norm,
        normalized_imag=imag / imag_norm,
    )


def eigvec_link_residual(eigs: EigenPairs, delta: float = DEFAULT_DELTA) -> float:
    """max_ij n |eta Im R_ij(lambda_1 + i eta) - v_i v_j| at eta = n^(-2/3-delta).

    Ties the top eigenvector's outer product to the imaginary part of the
    resolvent at the top eigenvalue; invariant under the vector's sign.
    """
    n = eigs.n
    if eigs.m < n:
        raise ValidationError("eigvec_link_residual needs the full eigendecomposition")
    eta = n ** (-delta - 2.0 / 3.0)
    z = complex(eigs.values[0], eta)
    im = imag_resolvent_full(eigs, z)
    v = eigs.vectors[:, 0]
    return float(n * np.abs(eta * im - np.outer(v, v)).max())


@dataclass(frozen=True)
class DetectionReport:
    ok: bool
    margins: np.ndarray   # per eigenvalue index j: rhs_max / lhs_j, >= 1 passes
    worst_index: int      # 1-based j with the smallest margin


def detect_top_from_resolvent(eigs: EigenPairs, energy: float, eta: float) -> DetectionReport:
    """Diagonal detection bound: some i has Im R_ii large enough to certify
    every eigenvalue location, ``max(eta, |lambda_j - E|)^-2 <= 2 n Im R_ii / eta``.
    """
    if eta <= 0:
        raise ValidationError("detection needs eta > 0")
    n = eigs.n
    if eigs.m < n:
        raise ValidationError("detection scan needs the full eigendecomposition")
    _, wi = _weights(eigs.values, complex(energy, eta))
    diag_im = (eigs.vectors**2) @ wi
    rhs = 2.0 * n / eta * float(diag_im.max())
    lhs = np.maximum(eta, np.abs(eigs.values - energy)) ** -2.0
    margins = rhs / lhs
    worst = int(np.argmin(margins))
    return DetectionReport(ok=bool((margins >= 1.0).all()), margins=margins, worst_index=worst + 1)


@dataclass(frozen=True)
class DriftReport:
    energies: np.ndarray
    eta: float
    per_energy: np.ndarray  # n eta max_ij |Im R^[k] - Im R| at each energy
    drift: float            # sup over the window


def resolvent_drift(
    eigs_base: EigenPairs,
    eigs_resampled: EigenPairs,
    model: EdgeModel,
    delta: float = DEFAULT_DELTA,
    count: int = WINDOW_ENERGIES,
) -> DriftReport:
    """sup over the edge window of n eta max_ij |Im R^[k]_ij - Im R_ij|.

    The window is centered at the base matrix's measured edge (model.chi from
    the base trial); both eigendecompositions must be full.
    """
    n = eigs_base.n
    if eigs_base.m < n or eigs_resampled.m < n:
        raise ValidationError("resolvent_drift needs full eigendecompositions")
    energies, eta = window_energies(n, delta, edge_location(model), count)
    per = np.empty(energies.size)
    for idx, e in enumerate(energies):
        z = complex(e, eta)
        d = imag_resolvent_full(eigs_base, z)
        d -= imag_resolvent_full(eigs_resampled, z)
        per[idx] = n * eta * float(np.abs(d).max())
    return DriftReport(energies=energies, eta=eta, per_energy=per, drift=float(per.max()))


def lambda1_drift(lam_base: float, lam_resampled: float, n: int, delta: float = DEFAULT_DELTA) -> tuple[float, float]:
    """Raw and normalized top-eigenvalue motion; normalization n^(2/3+delta)."""
    raw = abs(float(lam_base) - float(lam_resampled))
    return raw, raw * n ** (2.0 / 3.0 + delta)
