"""Self-consistent edge model: transforms, edge, quantiles, rigidity."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from rmt_noise.edge_model import (
    EdgeModel,
    StieltjesValue,
    edge_location,
    integrated_mass,
    m_sc,
    m_star,
    quantiles,
    rigidity_report,
    spectral_density,
)
from rmt_noise.errors import BranchTrackingError, ValidationError


# --- closed-form transform --------------------------------------------------------


def test_msc_decay_at_infinity():
    t = 1e6
    val = m_sc(complex(0.0, t)).value
    assert abs(val - complex(0.0, 1.0 / t)) <= 1e-6 / t


def test_msc_edge_degeneracy():
    # The two roots collide at z=2, where m -> -1.
    val = m_sc(complex(2.0, 1e-8)).value
    assert abs(val - (-1.0)) <= 2e-4


def test_msc_density_at_center():
    # Im m(E + i0+) = sqrt(4 - E^2)/2; at E=0 that is 1.
    val = m_sc(complex(0.0, 1e-8)).value
    assert abs(val.imag - 1.0) <= 1e-4
    assert abs(val.real) <= 1e-4


def test_msc_rejects_closed_half_plane():
    with pytest.raises(ValidationError):
        m_sc(complex(1.0, 0.0))
    with pytest.raises(ValidationError):
        m_sc(complex(1.0, -0.1))


def test_msc_self_consistency():
    for z in (complex(0.3, 0.7), complex(-1.9, 0.01), complex(5.0, 2.0)):
        m = m_sc(z).value
        assert abs(1.0 + z * m + m * m) <= 1e-12


def test_herglotz_guard_raises():
    with pytest.raises(BranchTrackingError):
        StieltjesValue(z=complex(0.0, 1.0), value=complex(0.5, -0.1))


# --- deformed transform ------------------------------------------------------------


def test_mstar_reduces_to_msc():
    model = EdgeModel()
    for z in (complex(0.0, 0.5), complex(1.7, 0.02), complex(-2.5, 3.0)):
        assert abs(m_star(model, z).value - m_sc(z).value) <= 1e-14


def test_mstar_is_rescaled_semicircle():
    # With no quartic term, m(z) = m_sc(z/s)/s with s = sqrt(1+chi), exactly.
    for chi in (-0.3, 0.05, 0.21, 0.9):
        model = EdgeModel(chi=chi)
        s = math.sqrt(1.0 + chi)
        for z in (complex(0.1, 0.4), complex(2.0, 0.01), complex(-1.2, 1.5)):
            direct = m_star(model, z).value
            rescaled = m_sc(z / s).value / s
            assert abs(direct - rescaled) <= 1e-12


def test_mstar_worked_example():
    # chi = 0.21: edge at 2*sqrt(1.21) = 2.2 and m(2.2 + i0+) = -1/1.1.
    model = EdgeModel(chi=0.21)
    assert edge_location(model) == pytest.approx(2.2, abs=1e-12)
    val = m_star(model, complex(2.2, 1e-8)).value
    assert abs(val - (-1.0 / 1.1)) <= 2e-4


def test_mstar_self_consistency_with_quartic():
    model = EdgeModel(chi=0.03, quartic=0.08, n=256, q=4.0)
    for z in (complex(0.0, 0.3), complex(1.9, 0.05), complex(-2.1, 0.7)):
        m = m_star(model, z).value
        p = 1.0 + z * m + (1.0 + model.chi) * m * m + model.quartic * m**4
        assert abs(p) <= 1e-10


def test_mstar_stays_near_msc_for_sparse_coefficients():
    # The deformation with quartic = xi/q^2, |xi| <= 3, and small chi stays
    # within a fitted C/q of the semicircle transform; measured sup 0.59.
    worst = 0.0
    cases = [(q, xi) for q in (7.0, 10.0) for xi in (-3.0, 3.0)] + [(4.0, 3.0)]
    for q, xi in cases:
        model = EdgeModel(chi=0.01, quartic=xi / q**2, n=512, q=q)
        for e in np.linspace(-2.8, 2.8, 9):
            for eta in (0.05, 0.5):
                z = complex(e, eta)
                worst = max(worst, abs(m_star(model, z).value - m_sc(z).value) * q)
    assert worst <= 1.0


def test_branch_continuity_on_vertical_lines():
    model = EdgeModel(chi=0.02, quartic=3.0 / 16.0, n=512, q=4.0)
    edge = edge_location(model)
    for e_off in (-0.05, 0.0, 0.05):
        etas = np.geomspace(10.0, 1e-6, 140)
        vals = np.array([m_star(model, complex(edge + e_off, h)).value for h in etas])
        assert np.max(np.abs(np.diff(vals))) <= 0.1


def test_model_validation():
    with pytest.raises(ValidationError):
        EdgeModel(chi=-1.0)
    with pytest.raises(ValidationError):
        EdgeModel(quartic=-0.1875)
    with pytest.raises(ValidationError):
        m_star(EdgeModel(), complex(1.0, 0.0))


# --- edge location ------------------------------------------------------------------


def test_edge_closed_form_and_taylor():
    assert edge_location(EdgeModel()) == 2.0
    chi = 0.01
    edge = edge_location(EdgeModel(chi=chi))
    assert edge == pytest.approx(2.0 * math.sqrt(1.01), abs=1e-15)
    # 2 sqrt(1+x) = 2 + x - x^2/4 + ..., so the shift beyond 2+chi is tiny.
    assert abs(edge - (2.0 + chi)) <= 3e-5


def test_quartic_edge_satisfies_double_root_equations():
    # At the support edge the Herglotz root collides: P and dP/dy vanish
    # together at a real y*.
    model = EdgeModel(chi=0.1, quartic=0.05, n=256, q=4.0)
    edge = edge_location(model)
    s2 = 1.0 + model.chi
    c4 = model.quartic
    u = (math.sqrt(s2 * s2 + 12 * c4) - s2) / (6 * c4)
    y = -math.sqrt(u)
    p = 1.0 + edge * y + s2 * y * y + c4 * y**4
    dp = edge + 2.0 * s2 * y + 4.0 * c4 * y**3
    assert abs(p) <= 1e-12
    assert abs(dp) <= 1e-12


def test_edge_asymptotics_inside_and_outside():
    # Im m(edge - kappa + i0+) ~ sqrt(kappa); Im m(edge + kappa + i0+) ~ eta/sqrt(kappa).
    eta = 1e-8
    for kappa in np.geomspace(1e-4, 1e-1, 7):
        inside = m_sc(complex(2.0 - kappa, eta)).value.imag / math.sqrt(kappa)
        outside = m_sc(complex(2.0 + kappa, eta)).value.imag * math.sqrt(kappa) / eta
        assert 0.9 <= inside <= 1.05
        assert 0.3 <= outside <= 0.6


# --- density and quantiles ------------------------------------------------------------


def test_density_closed_form_and_normalization():
    model = EdgeModel()
    assert spectral_density(model, np.array([0.0]))[0] == pytest.approx(1.0 / math.pi, abs=1e-15)
    assert spectral_density(model, np.array([2.5]))[0] == 0.0
    assert integrated_mass(model, -edge_location(model)) == pytest.approx(1.0, abs=1e-6)
    quart = EdgeModel(chi=0.02, quartic=0.0625, n=256, q=4.0)
    assert integrated_mass(quart, -edge_location(quart)) == pytest.approx(1.0, abs=1e-6)


def test_quantiles_structure():
    model = EdgeModel()
    n = 64
    table = quantiles(model, n)
    assert table.gammas[0] == edge_location(model)
    assert np.all(np.diff(table.gammas) <= 1e-12)
    # Symmetric density: the half-mass quantile sits at zero.
    mid = quantiles(model, 10).gammas[5]
    assert abs(mid) <= 1e-9


def test_quantile_quarter_mass_against_independent_quadrature():
    # For the semicircle, mass above gamma has the closed form
    # 1/2 - (gamma sqrt(4-gamma^2) + 4 asin(gamma/2)) / (4 pi).
    def mass_above(g):
        return 0.5 - (g * math.sqrt(4.0 - g * g) + 4.0 * math.asin(g / 2.0)) / (4.0 * math.pi)

    target = brentq(lambda g: mass_above(g) - 0.25, 0.0, 2.0, xtol=1e-14)
    n = 1024
    table = quantiles(EdgeModel(), n)
    got = table.gammas[n // 4]  # i = n/4 + 1 has mass 1/4 above
    assert abs(got - target) <= 1e-6


def test_quantile_round_trip():
    model = EdgeModel(chi=0.05)
    n = 256
    table = quantiles(model, n)
    for i in (2, 5, 32, 128, 200, 256):
        back = integrated_mass(model, float(table.gammas[i - 1]))
        assert abs(back - (i - 1) / n) <= 1e-8


def test_quantile_antisymmetry():
    n = 64
    gam = quantiles(EdgeModel(), n).gammas
    for i in range(2, n + 1):
        assert abs(gam[i - 1] + gam[n + 1 - i]) <= 1e-6


def test_quantiles_validation():
    with pytest.raises(ValidationError):
        quantiles(EdgeModel(), 0)


# --- rigidity -------------------------------------------------------------------------


def test_rigidity_zero_residuals():
    table = quantiles(EdgeModel(), 32)
    rep = rigidity_report(table.gammas.copy(), table, q=4.0)
    assert rep.max_normalized == 0.0
    assert rep.median_normalized == 0.0
    assert rep.normalization == pytest.approx(32 ** (-1 / 3) * 4.0**-3 + 32 ** (-2 / 3))


def test_rigidity_flags_worst_index():
    table = quantiles(EdgeModel(), 16)
    vals = table.gammas.copy()
    vals[4] -= 1e-3  # still descending
    rep = rigidity_report(vals, table, q=2.0)
    assert rep.argmax_index == 5
    assert rep.max_normalized == pytest.approx(1e-3 / rep.normalization, rel=1e-9)


def test_rigidity_validation():
    table = quantiles(EdgeModel(), 8)
    with pytest.raises(ValidationError):
        rigidity_report(table.gammas[:4], table, q=2.0)
    with pytest.raises(ValidationError):
        rigidity_report(table.gammas[::-1].copy(), table, q=2.0)
