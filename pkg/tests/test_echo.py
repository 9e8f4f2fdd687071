import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from landaukit import echo
from landaukit.errors import DegenerateDirectionError, RegimeWarning, UnsupportedError, ValidationError

P12 = echo.EchoParams(12.0)
E1 = np.array([1.0, 0.0, 0.0])


def test_params_default_b_and_regime_flag():
    assert P12.b == pytest.approx(1 / 12)
    assert P12.in_regime
    assert not echo.EchoParams(3.0).in_regime


def test_params_validation():
    with pytest.raises(ValidationError):
        echo.EchoParams(12.0, b=0.5)
    with pytest.raises(UnsupportedError):
        echo.EchoParams(12.0, dimension=2)
    with pytest.warns(RegimeWarning):
        echo.EchoParams(3.0, enforce_regime=True)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        echo.EchoParams(12.0, zeta=0.9, enforce_regime=True)


def test_kernel_bound_closed_form():
    t, tau = 3.0, 1.0
    k = np.array([1.0, 2.0, 0.0])
    l = np.array([0.5, 0.0, 1.0])
    kn, ln2 = math.sqrt(5.0), 1.25
    br2 = 1 + np.sum((k - l) ** 2) + np.sum((k * t - l * tau) ** 2)
    expected = math.sqrt(kn) * ln2 ** 0.25 * math.sqrt(2.0) / (1 + ln2) * br2 ** -6
    assert echo.kernel_bound(t, tau, k, l, P12) == pytest.approx(expected, rel=1e-14)


def test_kernel_bound_broadcasts():
    ls = np.array([[1.0, 0, 0], [2.0, 0, 0]])
    out = echo.kernel_bound(5.0, 2.0, E1, ls, P12)
    assert out.shape == (2,)
    assert out[1] == pytest.approx(echo.kernel_bound(5.0, 2.0, E1, ls[1], P12))


def test_resonant_region():
    cyl = echo.resonant_region(3.0, 2 * E1, P12)
    r = 4.0 ** -0.9 * 2.0 ** (1 / 12)
    assert cyl.radius == pytest.approx(r)
    assert cyl.cross_section == pytest.approx(math.pi * r * r)
    assert cyl.contains(np.array([10.0, 0.5 * r, 0.0]))
    assert not cyl.contains(np.array([0.0, 1.5 * r, 0.0]))
    with pytest.raises(DegenerateDirectionError):
        echo.resonant_region(1.0, np.zeros(3), P12)


def test_echo_time_prediction():
    assert echo.echo_time_prediction([2.0], 10.0, [1.0]) == pytest.approx(20.0)
    assert echo.echo_time_prediction(np.array([2.0, 1.0, 0.0]), 4.0, 2 * E1) == pytest.approx(4.0)
    assert echo.echo_time_prediction([-1.0], 3.0, [1.0]) is None
    with pytest.raises(DegenerateDirectionError):
        echo.echo_time_prediction([1.0], 1.0, [0.0])


def test_sums_vanish_at_zero_time_and_diverge_below_thresholds():
    assert echo.row_sum(0.0, E1, P12).total == 0.0
    # row sums need beta > d - 3/2, column sums need beta > d + 1/2
    assert math.isinf(echo.row_sum(10.0, E1, echo.EchoParams(1.5)).total)
    assert math.isinf(echo.column_sum(1.0, E1, echo.EchoParams(3.0), horizon=10.0).total)
    assert math.isfinite(echo.row_sum(10.0, E1, echo.EchoParams(3.0)).total)


def test_row_sum_routes_agree():
    a = echo.row_sum(10.0, E1, P12, "decomposed")
    b = echo.row_sum(10.0, E1, P12, "oracle")
    assert a.total == pytest.approx(b.total, rel=1e-5)
    assert 0 < a.resonant_share < 1


def test_column_sum_routes_agree():
    a = echo.column_sum(1.0, E1, P12, "decomposed", horizon=10.0)
    b = echo.column_sum(1.0, E1, P12, "oracle", horizon=10.0)
    assert a.total == pytest.approx(b.total, rel=1e-5)


def test_unknown_method():
    with pytest.raises(ValidationError):
        echo.row_sum(1.0, E1, P12, "magic")


def test_lattice_resonant_part_matches_direct_quadrature():
    k = np.array([1, 0, 0])
    res = echo.lattice_row_sum(40.0, k, P12, radius=12)
    oracle = 0.0
    for m in range(-12, 13):
        if m == 0:
            continue
        f = lambda tau: echo.kernel_bound(40.0, tau, k, np.array([m, 0.0, 0.0]), P12)
        pts = [40.0 / m] if 0 < 40.0 / m < 40.0 else None
        oracle += integrate.quad(f, 0.0, 40.0, points=pts, epsabs=0, epsrel=1e-13, limit=500)[0]
    assert oracle == pytest.approx(7.732161519713242, rel=1e-12)
    assert res.resonant == pytest.approx(oracle, rel=1e-10)
    assert res.total >= res.resonant
    assert res.tail_bound < 1e-3 * res.total


def test_lattice_needs_integer_vector():
    with pytest.raises(ValidationError):
        echo.lattice_row_sum(1.0, np.array([0.5, 0, 0]), P12)


def test_verdict_ratios_and_stabilization():
    v = echo.RegimeVerdict(12.0, 0.9, row_sups=[1.0, 1.02, 1.03], column_sups=[2.0, 2.0, 2.1],
                           horizons=(10.0, 20.0, 40.0))
    assert v.row_ratios == pytest.approx([1.02, 1.03 / 1.02])
    assert v.stabilized
    assert v.row_growth == pytest.approx(1.03)
    w = echo.RegimeVerdict(3.0, 0.9, row_sups=[1.0, 1.5], column_sups=[math.inf, math.inf], horizons=(10.0, 20.0))
    assert not w.stabilized
    assert math.isnan(w.column_growth)
    d = w.to_dict()
    assert d["stabilized"] is False and d["beta"] == 3.0
