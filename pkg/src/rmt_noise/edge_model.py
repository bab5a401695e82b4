"""Deterministic spectral model near the edge.

The limiting Stieltjes transform solves ``P(z, y) = 0`` with

    P(z, y) = 1 + z y + y^2 + chi y^2 + c4 y^4,

where ``chi`` is the measured trace correction of the matrix at hand and the
optional quartic coefficient ``c4`` models the first sparse correction.  The
physical solution is the Herglotz root, fixed by ``y ~ -1/z`` at large
``Im z`` and followed by continuity elsewhere.  Without the quartic term the
equation is solved in closed form and the model is an exact rescaling of the
semicircle: ``m(z) = m_sc(z / s) / s`` with ``s = sqrt(1 + chi)``, support
``[-2s, 2s]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import BranchTrackingError, ValidationError

_MASS_NODES = 16385  # theta-grid resolution for the integrated density


@dataclass(frozen=True)
class EdgeModel:
    """Parameters of the deterministic edge approximation.

    ``l0`` is the leading deterministic edge location used for recentering
    reports (2 for the pure quadratic model); ``chi`` the trace correction;
    ``quartic`` the optional y^4 coefficient (None = absent); ``n`` and ``q``
    are carried for normalizations that need them.
    """

    l0: float = 2.0
    chi: float = 0.0
    quartic: float | None = None
    n: int | None = None
    q: float | None = None

    def __post_init__(self) -> None:
        if 1.0 + self.chi <= 0.0:
            raise ValidationError(f"need 1 + chi > 0, got chi={self.chi}")
        if self.quartic is not None:
            disc = (1.0 + self.chi) ** 2 + 12.0 * self.quartic
            if disc <= 0.0:
                raise ValidationError(
                    f"quartic coefficient {self.quartic} too negative for a real support edge"
                )

    @property
    def scale(self) -> float:
        return math.sqrt(1.0 + self.chi)

    @property
    def has_quartic(self) -> bool:
        return self.quartic is not None and self.quartic != 0.0


@dataclass(frozen=True)
class StieltjesValue:
    """A Herglotz-checked Stieltjes transform evaluation."""

    z: complex
    value: complex

    def __post_init__(self) -> None:
        if self.z.imag > 0.0 and not self.value.imag > 0.0:
            raise BranchTrackingError(
                f"non-Herglotz Stieltjes value {self.value} at z={self.z}"
            )


@dataclass(frozen=True)
class QuantileTable:
    """Deterministic locations gamma_i with mass (i-1)/n above gamma_i."""

    n: int
    gammas: np.ndarray  # descending, gammas[0] = support edge
    edge: float
    model: EdgeModel


@dataclass(frozen=True)
class RigidityReport:
    residuals: np.ndarray          # |lambda_i - gamma_i|
    normalized: np.ndarray         # residuals / (n^(-1/3) q^(-3) + n^(-2/3))
    normalization: float
    max_normalized: float
    median_normalized: float
    argmax_index: int              # 1-based eigenvalue index of the worst residual


def _require_upper(z: complex) -> complex:
    z = complex(z)
    if not z.imag > 0.0:
        raise ValidationError(f"Stieltjes transforms are evaluated at Im z > 0, got {z}")
    return z


def _quad_root(zs: np.ndarray, s2: float) -> np.ndarray:
    """Herglotz root of 1 + z y + s2 y^2, vectorized over upper-half z.

    Uses the cancellation-free quadratic form: the root far from zero is
    computed by the formula, the one near zero from the root product, so the
    small root keeps full precision as |z| grows.
    """
    zs = np.asarray(zs, dtype=np.complex128)
    w = np.sqrt(zs * zs - 4.0 * s2)
    sign = np.where(np.real(np.conj(zs) * w) >= 0.0, 1.0, -1.0)
    qq = -(zs + sign * w) / 2.0
    r1 = qq / s2
    r2 = 1.0 / qq
    return np.where(r1.imag > 0.0, r1, r2)


def m_sc(z: complex) -> StieltjesValue:
    """Semicircle Stieltjes transform, the Herglotz root of 1 + z m + m^2."""
    z = _require_upper(z)
    val = complex(_quad_root(np.asarray([z]), 1.0)[0])
    return StieltjesValue(z=z, value=val)


def _poly_coeffs(model: EdgeModel, z: complex) -> np.ndarray:
    # numpy.roots convention: highest power first.
    return np.asarray([model.quartic or 0.0, 0.0, 1.0 + model.chi, z, 1.0], dtype=np.complex128)


def _track_root(model: EdgeModel, z: complex) -> complex:
    """Follow the Herglotz root from high up down to z by nearest-root steps."""
    x, eta = z.real, z.imag
    top = max(8.0, 2.0 * eta, 2.0 * abs(x))
    ladder = [top]
    while ladder[-1] > eta * 1.0000001:
        ladder.append(max(eta, ladder[-1] / 1.4))
    current = complex(_quad_root(np.asarray([x + 1j * top]), 1.0 + model.chi)[0])
    for h in ladder:
        zz = x + 1j * h
        roots = np.roots(_poly_coeffs(model, zz))
        dist = np.abs(roots - current)
        order = np.argsort(dist)
        nearest = roots[order[0]]
        if roots.size > 1 and dist[order[0]] > 0.5 * dist[order[1]]:
            # Ambiguous step: two roots nearly equidistant means the ladder
            # jumped over a near-collision.  Refine once; give up loudly.
            mid = x + 1j * (h * 1.18)
            mid_roots = np.roots(_poly_coeffs(model, mid))
            current = complex(mid_roots[np.argmin(np.abs(mid_roots - current))])
            dist = np.abs(roots - current)
            order = np.argsort(dist)
            nearest = roots[order[0]]
            if roots.size > 1 and dist[order[0]] > 0.5 * dist[order[1]]:
                raise BranchTrackingError(f"root collision while tracking the branch to z={z}")
        current = complex(nearest)
    if not current.imag > 0.0:
        raise BranchTrackingError(f"tracked root left the upper half plane at z={z}")
    return current


def _m_star_values(model: EdgeModel, zs: np.ndarray) -> np.ndarray:
    zs = np.asarray(zs, dtype=np.complex128)
    if not model.has_quartic:
        return _quad_root(zs, 1.0 + model.chi)
    flat = zs.ravel()
    out = np.asarray([_track_root(model, complex(z)) for z in flat], dtype=np.complex128)
    return out.reshape(zs.shape)


def m_star(model: EdgeModel, z: complex) -> StieltjesValue:
    """Herglotz solution of the self-consistent equation at z (Im z > 0)."""
    z = _require_upper(z)
    val = complex(_m_star_values(model, np.asarray([z]))[0])
    return StieltjesValue(z=z, value=val)


def edge_location(model: EdgeModel) -> float:
    """Right endpoint of the support (where the Herglotz root collides).

    Closed form in both cases: ``2 sqrt(1 + chi)`` without the quartic term;
    with it, the double-root condition P = dP/dy = 0 reduces to
    ``3 c4 u^2 + (1 + chi) u = 1`` for ``u = y^2``.
    """
    s2 = 1.0 + model.chi
    if not model.has_quartic:
        return 2.0 * math.sqrt(s2)
    c4 = float(model.quartic)
    disc = s2 * s2 + 12.0 * c4
    u = (math.sqrt(disc) - s2) / (6.0 * c4) if c4 != 0 else 1.0 / s2
    if u <= 0.0:
        raise ValidationError(f"quartic coefficient {c4} yields no positive double root")
    ru = math.sqrt(u)
    return 2.0 * s2 * ru + 4.0 * c4 * u * ru


def spectral_density(model: EdgeModel, energies: np.ndarray) -> np.ndarray:
    """Density of the limiting measure on the real line (eta -> 0+ limit)."""
    energies = np.atleast_1d(np.asarray(energies, dtype=np.float64))
    s2 = 1.0 + model.chi
    if not model.has_quartic:
        rad = 4.0 * s2 - energies**2
        return np.sqrt(np.maximum(rad, 0.0)) / (2.0 * math.pi * s2)
    out = np.zeros_like(energies)
    for idx, e in enumerate(energies):
        roots = np.roots(_poly_coeffs(model, complex(e)))
        upper = roots[roots.imag > 1e-12]
        if upper.size == 0:
            continue
        # Among upper-half roots take the continuation of the quadratic
        # model's root (they coincide as c4 -> 0).
        rad = complex(e * e - 4.0 * s2)
        guide = (-e + np.sqrt(rad + 0j)) / (2.0 * s2)
        if guide.imag <= 0.0:
            guide = np.conj(guide)
        out[idx] = upper[np.argmin(np.abs(upper - guide))].imag / math.pi
    return out


@lru_cache(maxsize=64)
def _mass_profile(model: EdgeModel) -> tuple[np.ndarray, np.ndarray, float]:
    """Integrated density from the right edge, on a theta grid E = L cos(theta)."""
    edge = edge_location(model)
    thetas = np.linspace(0.0, math.pi, _MASS_NODES)
    energies = edge * np.cos(thetas)
    dens = spectral_density(model, energies)
    g = dens * edge * np.sin(thetas)
    mass = cumulative_simpson(g, x=thetas, initial=0.0)
    total = float(mass[-1])
    if abs(total - 1.0) > 1e-6:
        raise BranchTrackingError(
            f"model density integrates to {total:.8f}, not 1; quartic term too large?"
        )
    return thetas, mass, edge


def integrated_mass(model: EdgeModel, gamma: float) -> float:
    """Mass of the limiting measure on [gamma, edge]."""
    thetas, mass, edge = _mass_profile(model)
    theta = math.acos(min(1.0, max(-1.0, gamma / edge)))
    return float(np.interp(theta, thetas, mass))


def quantiles(model: EdgeModel, n: int) -> QuantileTable:
    """gamma_i with mass (i-1)/n above gamma_i; gamma_1 is the edge exactly."""
    if n < 1:
        raise ValidationError("quantile table needs n >= 1")
    thetas, mass, edge = _mass_profile(model)
    targets = (np.arange(1, n + 1) - 1.0) / n
    theta_i = np.interp(targets, mass, thetas)
    # Newton polish against the interpolated profile; the density is the
    # exact derivative of the mass in theta.
    for _ in range(3):
        g = spectral_density(model, edge * np.cos(theta_i)) * edge * np.sin(theta_i)
        f = np.interp(theta_i, thetas, mass)
        step = np.where(g > 1e-9, (f - targets) / np.maximum(g, 1e-9), 0.0)
        theta_i = np.clip(theta_i - step, 0.0, math.pi)
    gammas = edge * np.cos(theta_i)
    gammas[0] = edge
    return QuantileTable(n=n, gammas=gammas, edge=edge, model=model)


def rigidity_report(values: np.ndarray, table: QuantileTable, q: float) -> RigidityReport:
    """Eigenvalue-vs-quantile residuals in units of n^(-1/3) q^(-3) + n^(-2/3)."""
    values = np.asarray(values, dtype=np.float64)
    if values.size != table.n:
        raise ValidationError(
            f"need the full spectrum ({table.n} values) to compare against the table, got {values.size}"
        )
    if np.any(np.diff(values) > 0):
        raise ValidationError("eigenvalues must be in descending order")
    n = table.n
    norm = n ** (-1.0 / 3.0) * q ** (-3.0) + n ** (-2.0 / 3.0)
    residuals = np.abs(values - table.gammas)
    normalized = residuals / norm
    worst = int(np.argmax(normalized))
    return RigidityReport(
        residuals=residuals,
        normalized=normalized,
        normalization=norm,
        max_normalized=float(normalized[worst]),
        median_normalized=float(np.median(normalized)),
        argmax_index=worst + 1,
    )
