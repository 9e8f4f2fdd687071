import math

import numpy as np
import pytest

from landaukit import volterra as vt
from landaukit.errors import ConfigurationError, InconclusiveHorizonError, NearSingularError, ValidationError
from landaukit.model import Equilibrium, Potential

EQ = Equilibrium.maxwellian(3)
POT = Potential.screened(1.0)


def linear_kernel_problem(a, dt, T=4.0):
    # φ = 1 + a∫₀ᵗ (t−τ) φ dτ  ⇒  φ = cosh(√a t) for a > 0, cos(√−a t) for a < 0
    t = dt * np.arange(int(round(T / dt)) + 1)
    return vt.VolterraProblem(1.0, dt, T + dt, np.ones_like(t, dtype=complex), (a * t).astype(complex))


@pytest.mark.parametrize("a", [0.5, -2.0])
def test_time_route_second_order_on_closed_form(a):
    errs = []
    for dt in (0.02, 0.01):
        p = linear_kernel_problem(a, dt)
        exact = np.cosh(math.sqrt(a) * p.times) if a > 0 else np.cos(math.sqrt(-a) * p.times)
        errs.append(np.max(np.abs(vt.solve_time(p).phi - exact)))
    assert errs[1] < 1e-4
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_kernel_matches_equilibrium_transform():
    t = np.array([0.0, 0.5, 2.0])
    expected = -(2 * math.pi) ** -3 * np.exp(-t * t / 2) * 0.5 * t
    assert np.allclose(vt.kernel_k0(EQ, POT, t, 1.0), expected, rtol=1e-14)


def test_zero_potential_returns_forcing():
    p = vt.VolterraProblem.build(EQ, Potential.zero(), 1.0, vt.bump_forcing(1.0), 0.05, 10.0)
    sol = vt.solve_time(p)
    assert np.array_equal(sol.phi, p.forcing)
    assert sol.cld_ratio == pytest.approx(1.0)


@pytest.mark.parametrize("forcing", [vt.bump_forcing(1.0), vt.gaussian_forcing(3.0, 0.5)])
def test_time_and_frequency_routes_agree(forcing):
    p = vt.VolterraProblem.build(EQ, POT, 1.0, forcing, 0.01, 20.0)
    a = vt.solve_time(p).phi
    b = vt.solve_frequency(p).phi
    assert np.max(np.abs(a - b)) <= 1e-7 * np.max(np.abs(a))


def test_frequency_route_refuses_near_singular_symbol():
    # an attractive potential tuned so that 𝓛(0, k=1) = 1
    pot = Potential.screened(1.0, scale=-2 * (2 * math.pi) ** 3)
    p = vt.VolterraProblem.build(EQ, pot, 1.0, vt.bump_forcing(1.0), 0.01, 10.0)
    with pytest.raises(NearSingularError):
        vt.solve_frequency(p)


def test_step_restriction():
    p = linear_kernel_problem(1e4, 0.01)
    with pytest.raises(ConfigurationError):
        vt.solve_time(p)


def test_forcing_vanishes_after_t_star():
    p = vt.VolterraProblem.build(EQ, POT, 1.0, vt.gaussian_forcing(3.0, 1.0), 0.1, 5.0, horizon=10.0)
    assert np.all(p.forcing[p.times >= 5.0] == 0)
    assert p.n_star == 50


def test_weight_is_bracket_power():
    p = vt.VolterraProblem.build(EQ, POT, 2.0, vt.bump_forcing(1.0), 0.5, 2.0, alpha=1.0, s=2.0)
    t = p.times
    assert np.allclose(p.weight(), 2.0 * (1 + 4 + 4 * t * t))


def test_forcing_family_names():
    assert len(vt.forcing_family("a_bump")) == 3
    assert len(vt.forcing_family("gaussian")) == 4
    with pytest.raises(ValidationError):
        vt.forcing_family("nope")


def test_damping_study_is_stable_for_screened_maxwellian():
    st = vt.damping_study(EQ, POT, "a_bump", 0.0, 4.0, (1.0,), t_star=20.0, dt=0.02)
    assert st.stable
    assert 0 < st.value < 1.5


def test_damping_study_strict_flags_drift():
    # attractive potential with 𝓛(0, k=1) = 1.2: a growing mode, so doubling T★ inflates the ratio
    pot = Potential.screened(1.0, scale=-2.4 * (2 * math.pi) ** 3)
    st = vt.damping_study(EQ, pot, "a_bump", 0.0, 0.0, (1.0,), t_star=10.0, dt=0.05)
    assert not st.stable
    with pytest.raises(InconclusiveHorizonError):
        vt.damping_study(EQ, pot, "a_bump", 0.0, 0.0, (1.0,), t_star=10.0, dt=0.05, strict=True)
