"""Acceptance checks, one test per criterion.

Each test prints a PASS/FAIL line and appends it to the session log, which the
terminal summary repeats at the end of the run.  Run this file directly to get
only these lines: python tests/test_acceptance.py
"""

import math
import time
import warnings

import numpy as np
import pytest

from landaukit import diagnostics as dg
from landaukit import echo
from landaukit import simulator as sm
from landaukit import volterra as vt
from landaukit.dispersion import (
    DispersionGrid,
    convention_constant,
    dispersion_penrose,
    dispersion_time,
    stability_margin,
)
from landaukit.errors import HorizonWarning
from landaukit.model import Equilibrium, Potential

KMAGS = (0.25, 1.0, 4.0)


def report(log, number, title, checks, elapsed, limit):
    """checks: list of (label, ok, detail).  The runtime limit is one more check."""
    checks = list(checks) + [("runtime", elapsed < limit, f"{elapsed:.1f}s < {limit:g}s")]
    ok = all(c[1] for c in checks)
    detail = "; ".join(f"{label} {'ok' if good else 'FAILED'} ({info})" for label, good, info in checks)
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title} | {detail}"
    print(line)
    log.append(line)
    assert ok, line


def test_criterion_01_free_transport_exact(acceptance_log):
    t0 = time.perf_counter()
    cfg = sm.SimConfig(dimension=1, N_z=64, N_v=64, mode="free", dt=0.1, T_end=10.0)
    sim = sm.Simulator(cfg)
    s0 = sim.initial_state()
    s = s0
    for _ in range(100):
        s = sim.step(s)
    change = float(np.max(np.abs(s.g_hat - s0.g_hat)) / np.max(np.abs(s0.g_hat)))
    elapsed = time.perf_counter() - t0
    report(acceptance_log, 1, "free-transport exactness",
           [("max relative change", change < 1e-12, f"{change:.2e} < 1e-12")], elapsed, 1.0)


def test_criterion_02_dispersion_routes(acceptance_log):
    t0 = time.perf_counter()
    eq = Equilibrium.maxwellian(3, temperature=1.0)
    pot = Potential.screened(1.0)
    c = convention_constant(3)
    ratios = np.geomspace(0.05, 50.0, 61)
    worst, conj = 0.0, 0.0
    for k in KMAGS:
        om = ratios * k
        t_route = dispersion_time(eq, pot, om, k)
        p_route = np.atleast_1d(dispersion_penrose(eq, pot, om, k))
        worst = max(worst, float(np.max(np.abs(t_route - c * p_route) / (1e-6 * (1 + np.abs(t_route))))))
        conj = max(conj, float(np.max(np.abs(dispersion_time(eq, pot, -om, k) - np.conj(t_route)))))
        p_neg = np.atleast_1d(dispersion_penrose(eq, pot, -om, k))
        conj = max(conj, float(np.max(np.abs(p_neg - np.conj(p_route)))))
    elapsed = time.perf_counter() - t0
    report(acceptance_log, 2, "dispersion route agreement", [
        ("|L_time - c L_penrose| / 1e-6(1+|L|)", worst <= 1.0, f"worst {worst:.3g} <= 1"),
        ("conjugate symmetry", conj <= 1e-10, f"{conj:.2e} <= 1e-10"),
    ], elapsed, 30.0)


def test_criterion_03_screened_stability(acceptance_log):
    t0 = time.perf_counter()
    eq = Equilibrium.maxwellian(3)
    grid = DispersionGrid.standard(kmags=KMAGS)
    kappas, winding = {}, True
    for alpha in (0.5, 1.0, 2.0):
        rep = stability_margin(eq, Potential.screened(alpha), grid)
        kappas[alpha] = rep.kappa
        winding &= all(rep.winding_ok.values())
    values = [kappas[a] for a in (0.5, 1.0, 2.0)]
    elapsed = time.perf_counter() - t0
    report(acceptance_log, 3, "screened stability", [
        ("kappa > 0", min(values) > 0, ", ".join(f"a={a:g}: {kappas[a]:.6f}" for a in kappas)),
        ("winding_ok everywhere", winding, str(winding)),
        ("kappa decreases as alpha decreases", values[0] < values[1] < values[2], "strict"),
    ], elapsed, 120.0)


def test_criterion_04_linear_damping(acceptance_log):
    t0 = time.perf_counter()
    eq = Equilibrium.maxwellian(3)
    pot = Potential.screened(1.0)
    worst = 0.0
    for k in KMAGS:
        for H in vt.forcing_family("a_bump"):
            prob = vt.VolterraProblem.build(eq, pot, k, H, 0.01, 40.0)
            a = vt.solve_time(prob).phi
            b = vt.solve_frequency(prob).phi
            worst = max(worst, float(np.max(np.abs(a - b)) / np.max(np.abs(a))))
    study = vt.damping_study(eq, pot, "a_bump", 0.0, 4.0, KMAGS, t_star=40.0, dt=0.01)
    elapsed = time.perf_counter() - t0
    report(acceptance_log, 4, "linear Landau damping", [
        ("time vs frequency route", worst <= 1e-6, f"{worst:.2e} <= 1e-6"),
        ("damping constant under T* -> 2T*", study.stable,
         f"{study.value:.6f} -> {study.doubled_value:.6f}, drift {study.drift:.2e} < 0.1"),
    ], elapsed, 120.0)


def test_criterion_05_linearized_simulator_vs_volterra(acceptance_log):
    t0 = time.perf_counter()
    eps = 1e-4
    comps = tuple(sm.SeedComponent(1.0, (k,), (0.0,), 1.0) for k in (0.5, 1.0))
    seed = sm.SeedSpec(comps)
    cfg = sm.SimConfig(dimension=1, L_box=4 * math.pi, N_z=16, N_v=512, v_max=12.0, dt=0.05, T_end=40.0,
                       epsilon=eps, mode="linearized", seed=seed)
    _, hist = sm.Simulator(cfg).run(track=[(1,), (2,)])
    eq = Equilibrium.maxwellian(1)
    pot = Potential.screened(1.0)
    errs = {}
    for m, k in ((1, 0.5), (2, 1.0)):
        t, rho = hist.series((m,))
        H = lambda tt, km: eps * np.exp(-0.5 * (km * tt) ** 2).astype(complex)
        prob = vt.VolterraProblem.build(eq, pot, k, H, 0.005, 40.0, horizon=40.0)
        phi = vt.solve_time(prob).phi
        idx = np.rint(np.asarray(t) / 0.005).astype(int)
        errs[k] = float(np.max(np.abs(rho - phi[idx])) / np.max(np.abs(phi)))
    elapsed = time.perf_counter() - t0
    worst = max(errs.values())
    report(acceptance_log, 5, "linearized simulator vs Volterra", [
        ("sup-relative error over [0,40]", worst <= 1e-3,
         ", ".join(f"|k|={k:g}: {e:.2e}" for k, e in errs.items()) + " <= 1e-3"),
    ], elapsed, 300.0)


def test_criterion_06_echo_regime_dichotomy(acceptance_log):
    t0 = time.perf_counter()
    stable = echo.regime_study(echo.EchoParams(12.0, 0.9))
    weak = echo.regime_study(echo.EchoParams(3.0, 0.9))
    elapsed = time.perf_counter() - t0

    def growth_check(sups):
        finite = all(math.isfinite(x) for x in sups)
        if not finite:
            return False, "sums diverge at every horizon, so final/initial is undefined"
        monotone = all(b >= a for a, b in zip(sups[:-1], sups[1:]))
        g = sups[-1] / sups[0]
        return monotone and g > 2, f"monotone={monotone}, final/initial={g:.4f} > 2"

    row_ok, row_info = growth_check(weak.row_sups)
    col_ok, col_info = growth_check(weak.column_sups)
    ratios12 = stable.row_ratios + stable.column_ratios
    disagreement = max(stable.max_disagreement, weak.max_disagreement)
    report(acceptance_log, 6, "echo regime dichotomy", [
        ("beta=12 horizon-doubling ratios within 10% of 1", stable.stabilized,
         "[" + ", ".join(f"{r:.5f}" for r in ratios12) + "]"),
        ("beta=3 no stabilization", not weak.stabilized, f"stabilized={weak.stabilized}"),
        ("beta=3 row sums grow", row_ok, row_info),
        ("beta=3 column sums grow", col_ok, col_info),
        ("decomposed vs oracle at every probe", disagreement <= 1e-3, f"max rel {disagreement:.2e} <= 1e-3"),
    ], elapsed, 600.0)


def test_criterion_07_lattice_resonance_contrast(acceptance_log):
    t0 = time.perf_counter()
    params = echo.EchoParams(12.0, 0.9)
    lattice = echo.lattice_row_sum(40.0, np.array([1, 0, 0]), params, radius=12)
    continuum = echo.row_sum(40.0, np.array([1.0, 0.0, 0.0]), params)
    elapsed = time.perf_counter() - t0
    report(acceptance_log, 7, "R^3 vs Z^3 resonance contrast", [
        ("lattice share > continuum share", lattice.resonant_share > continuum.resonant_share,
         f"{lattice.resonant_share:.10f} > {continuum.resonant_share:.6f}"),
    ], elapsed, 120.0)


def test_criterion_08_conservation_and_symmetry(acceptance_log):
    t0 = time.perf_counter()
    cfg = sm.SimConfig(dimension=1, N_z=32, N_v=256, v_max=10.0, dt=0.05, T_end=40.0, epsilon=1e-3,
                       mode="nonlinear", keep_states_every=40)
    sim = sm.Simulator(cfg)
    s0 = sim.initial_state()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HorizonWarning)
        final, hist = sim.run()
    scale = float(np.max(np.abs(s0.g_hat)))
    drift = max(abs(s.mass - s0.mass) for s in hist.states) / scale
    reality = max(s.reality_defect() for s in hist.states)
    elapsed = time.perf_counter() - t0
    report(acceptance_log, 8, "conservation and symmetry", [
        ("mass drift relative to max|g_in|", drift < 1e-10, f"{drift:.2e} < 1e-10"),
        ("reality defect", reality < 1e-12, f"{reality:.2e} < 1e-12"),
    ], elapsed, 300.0)


def test_criterion_09_echo_timing(acceptance_log):
    t0 = time.perf_counter()
    k0, tau, cell = 1.0, 10.0, 1.0
    seed = sm.two_mode_echo_seed(k0, tau, eta_width=0.5)
    cfg = sm.SimConfig(dimension=1, L_box=2 * math.pi / k0, N_z=16, N_v=512, v_max=16.0, dt=0.03, T_end=30.0,
                       epsilon=5e-2, mode="nonlinear", seed=seed, record_every=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HorizonWarning)
        _, hist = sm.Simulator(cfg).run()
    t, rho = hist.series((1,))
    peak = sm.secondary_peak(t, rho)
    predicted = echo.echo_time_prediction([2 * k0], tau, [k0])
    elapsed = time.perf_counter() - t0
    ok = peak is not None and abs(peak - predicted) <= cell
    report(acceptance_log, 9, "echo timing", [
        ("secondary peak within one coarse cell", ok,
         f"peak {peak} vs predicted {predicted:g}, cell {cell:g}"),
    ], elapsed, 300.0)


def test_criterion_10_decay_rate_fits(acceptance_log):
    t0 = time.perf_counter()
    L = 32 * math.pi
    seed = sm.SeedSpec.gaussian((1.0,), eta_width=1.0, k_width=0.5)
    cfg = sm.SimConfig(dimension=1, L_box=L, N_z=256, N_v=128, v_max=10.0, dt=0.1, T_end=20.0, mode="free",
                       seed=seed, record_every=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HorizonWarning)
        _, free_hist = sm.Simulator(cfg).run()
    disp = dg.dispersive_decay_check(free_hist, 0.0, 0.0, 11.0, dk=2 * math.pi / L)

    sech = sm.SeedSpec((sm.SeedComponent(1.0, (1.0,), (0.0,), 1.0, 0.0, "sech"),))
    cfg = sm.SimConfig(dimension=1, L_box=4 * math.pi, N_z=16, N_v=512, v_max=12.0, dt=0.05, T_end=30.0,
                       epsilon=1e-4, mode="linearized", seed=sech, record_every=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HorizonWarning)
        _, lin_hist = sm.Simulator(cfg).run()
    t, rho = lin_hist.series((2,))
    a = np.abs(rho)
    # keep the part of the record above the double-precision noise floor
    keep = a > 1e-8 * a.max()
    exp_fit = dg.decay_fit((t[keep], a[keep]), "exponential")
    pow_fit = dg.decay_fit((t[keep], a[keep]), "power", against="bracket")
    elapsed = time.perf_counter() - t0
    report(acceptance_log, 10, "decay-rate fits", [
        ("free dispersive exponent", disp.rate <= -0.8, f"{disp.rate:.3f} <= -0.8"),
        ("exponential beats power at |k|=1", exp_fit.residual < pow_fit.residual,
         f"residual {exp_fit.residual:.3g} (rate {exp_fit.rate:.3f}) < {pow_fit.residual:.3g}"),
    ], elapsed, 300.0)


def test_criterion_11_initial_data_norms(acceptance_log):
    t0 = time.perf_counter()
    seed = sm.SeedSpec.gaussian((1.0,), eta_width=1.0, k_width=0.15)
    base = dg.initial_data_norms(seed, 5.0)
    l2_ref, cl_ref = dg.initial_data_norms_oracle(seed, 5.0, refine=4)
    scaled = dg.initial_data_norms(sm.SeedSpec.gaussian((1.0,), amplitude=2.0, eta_width=1.0, k_width=0.15), 5.0,
                                   moments=False)
    rel = max(abs(base.l2 / l2_ref - 1), abs(base.chemin_lerner / cl_ref - 1))
    homog = max(abs(scaled.l2 / base.l2 - 2), abs(scaled.chemin_lerner / base.chemin_lerner - 2))
    finite = all(math.isfinite(x) and x > 0 for x in base.as_tuple())
    elapsed = time.perf_counter() - t0
    report(acceptance_log, 11, "initial-data norms", [
        ("both norms finite", finite, f"L2L2 {base.l2:.10g}, Chemin-Lerner {base.chemin_lerner:.10g}"),
        ("4x refined oracle", rel <= 1e-4, f"{rel:.2e} <= 1e-4"),
        ("amplitude homogeneity", homog <= 1e-12, f"{homog:.1e} <= 1e-12"),
    ], elapsed, 60.0)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
