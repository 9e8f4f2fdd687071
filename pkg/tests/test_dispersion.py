import math

import numpy as np
import pytest
from scipy.special import wofz

from landaukit.dispersion import (
    DispersionGrid,
    asymptotic_values,
    convention_constant,
    derivative_bound_check,
    dispersion_penrose,
    dispersion_time,
    large_ratio_asymptotics,
    small_data_check,
    stability_margin,
    winding_number,
)
from landaukit.errors import AccuracyError, CrossValidationError, DomainError, ValidationError
from landaukit.model import Equilibrium, Potential

EQ = Equilibrium.maxwellian(3)
POT = Potential.screened(1.0)


def maxwellian_dispersion(omega, kmag, alpha=1.0, d=3):
    """−Ŵ(2π)^{-d}(1 − iu J(u)), J(u) = ∫₀^∞ e^{-s²/2 − ius} ds = √(π/2) w(−u/√2)."""
    u = np.asarray(omega) / kmag
    J = math.sqrt(math.pi / 2) * wofz(-u / math.sqrt(2))
    return -(1 / (alpha + kmag ** 2)) * (2 * math.pi) ** (-d) * (1 - 1j * u * J)


@pytest.mark.parametrize("kmag", [0.25, 1.0, 4.0])
def test_time_route_matches_faddeeva_closed_form(kmag):
    om = kmag * np.array([0.05, 0.3, 1.0, 2.5, 7.0, 30.0])
    got = dispersion_time(EQ, POT, om, kmag)
    ref = maxwellian_dispersion(om, kmag)
    assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_convention_constant_is_real_and_positive():
    c = convention_constant(3)
    assert abs(c.imag) < 1e-10 * abs(c.real)
    assert c.real > 0


def test_penrose_route_agrees_after_convention_constant():
    c = convention_constant(3)
    om = np.array([0.2, 1.0, 3.0])
    for kmag in (0.5, 2.0):
        t = dispersion_time(EQ, POT, om, kmag)
        p = np.array([dispersion_penrose(EQ, POT, w, kmag) for w in om]).ravel()
        assert np.max(np.abs(t - c * p) / (1 + np.abs(t))) < 1e-8


def test_conjugate_symmetry():
    om = np.linspace(0.1, 5, 9)
    a = dispersion_time(EQ, POT, om, 1.0)
    b = dispersion_time(EQ, POT, -om, 1.0)
    assert np.max(np.abs(b - np.conj(a))) < 1e-10


def test_zero_potential_gives_zero():
    assert dispersion_time(EQ, Potential.zero(), 1.0, 1.0) == 0


def test_dispersion_needs_nonzero_k():
    with pytest.raises(ValidationError):
        dispersion_time(EQ, POT, 1.0, 0.0)


def test_short_horizon_is_reported():
    with pytest.raises(AccuracyError):
        dispersion_time(EQ, POT, 1.0, 1.0, horizon=1.0)


def test_large_ratio_expansion_refuses_band_and_matches_tail():
    with pytest.raises(DomainError):
        large_ratio_asymptotics(EQ, POT, 1.0, 10.0)
    om = 80.0
    ref = maxwellian_dispersion(om, 1.0)
    got = large_ratio_asymptotics(EQ, POT, 1.0, om)
    assert abs(got - ref) <= 1e-3 * abs(ref)
    assert np.allclose(asymptotic_values(EQ, POT, 1.0, np.array([om])), got)


def test_stability_margin_for_screened_maxwellian():
    grid = DispersionGrid.standard(kmags=(1.0,), n_band=16)
    rep = stability_margin(EQ, POT, grid)
    ref = maxwellian_dispersion(np.array(grid.omega_samples), 1.0)
    assert rep.kappa == pytest.approx(float(np.min(np.abs(ref - 1))), rel=1e-9)
    assert rep.kappa > 0 and not rep.unstable
    assert rep.cross_validation_ok
    d = rep.to_dict()
    assert d["winding_ok"] == {"1": True}


def test_strict_cross_validation_raises():
    grid = DispersionGrid.standard(kmags=(1.0,), n_band=8)
    with pytest.raises(CrossValidationError):
        stability_margin(EQ, POT, grid, agreement_tol=0.0, strict=True)


def test_winding_number_zero_for_stable_case():
    assert winding_number(EQ, POT, 1.0) == 0


def test_small_data_check_against_fourier_side_oracle():
    # ‖W‖_{L¹}=1 for α=1.  The Sobolev factor was evaluated separately on the
    # Fourier side: radial quadrature of (1+r²)^{1.51}|∂^α e^{-r²/2}|² with
    # angular moments, summed over the ten multi-indices |α| ≤ 2.
    assert small_data_check(EQ, POT) == pytest.approx(2.880739663478656, rel=1e-9)


def test_derivative_bound_is_finite():
    grid = DispersionGrid.standard(kmags=(1.0,), n_band=8)
    c = derivative_bound_check(EQ, POT, 1, 0.01, grid)
    assert 0 < c < math.inf


def test_grid_validation():
    with pytest.raises(ValidationError):
        DispersionGrid((1.0,), (0.0,))
    with pytest.raises(ValidationError):
        DispersionGrid((1.0,), (1.0,), tail_cut_m=10, tail_cut_M=5)
