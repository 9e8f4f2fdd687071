"""The dispersion function 𝓛(iω,k) and the stability margin built on it.

Two independent evaluations are provided.  The time route integrates the
Fourier–Laplace transform of the Volterra kernel directly.  The Penrose route
works with the hyperplane marginal of f⁰ and a principal-value integral.  The
two differ by one convention constant, which is measured rather than assumed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from . import _quadrature as gq
from .errors import (
    AccuracyError,
    CrossValidationError,
    DomainError,
    QuadratureError,
    ValidationError,
)
from .model import (
    Equilibrium,
    Potential,
    equilibrium_sobolev_norm,
    fourier_equilibrium_radial,
    marginal,
    potential_l1_norm,
)

__all__ = [
    "DispersionGrid",
    "StabilityReport",
    "dispersion_time",
    "dispersion_penrose",
    "convention_constant",
    "stability_margin",
    "large_ratio_asymptotics",
    "small_data_check",
    "derivative_bound_check",
    "winding_number",
    "asymptotic_values",
]

TAIL_TOL = 1e-12
_CHUNK = 64


def _kmag(k) -> float:
    a = np.asarray(k, dtype=float)
    return float(np.sqrt(np.sum(a * a))) if a.ndim else abs(float(a))


def _line_profile(eq: Equilibrium, s, j: int):
    """f̂⁰(s ê)·s·(−is)^j, the integrand of the j-th ω-derivative without the phase."""
    f = fourier_equilibrium_radial(eq, s)
    return f * s * (-1j * s) ** j


def _tail_horizon(eq: Equilibrium, j: int) -> float:
    """Smallest S with |integrand(s)| ≤ TAIL_TOL·peak for every s ≥ S."""
    if eq.kind == "maxwellian":
        smax = math.sqrt(2.0 * (60.0 + 2 * j) / eq.temperature) * 2
    else:
        smax = math.pi / eq.table.max_spacing
    s = np.linspace(0.0, smax, 4001)
    mag = np.abs(_line_profile(eq, s, j))
    peak = mag.max()
    above = np.nonzero(mag > TAIL_TOL * peak)[0]
    last = above[-1] if above.size else 0
    if last >= s.size - 2:
        raise AccuracyError(
            f"integrand tail {mag[-1] / peak:.3e} of peak at the resolvable limit s={smax:.4g}; "
            f"cannot reach {TAIL_TOL:g}"
        )
    return float(s[last + 1])


def dispersion_time(eq: Equilibrium, pot: Potential, omega, k, *, horizon=None, refine: int = 1,
                    derivative: int = 0):
    """𝓛(iω,k) = −∫₀^∞ e^{−iωt} f̂⁰(kt) Ŵ(k)|k|² t dt, or its `derivative`-th ω-derivative.

    Vectorized over `omega`.  With `horizon` given, the integral is cut at that
    time and an AccuracyError reports the tail if it is not negligible.
    """
    kmag = _kmag(k)
    if kmag <= 0:
        raise ValidationError("dispersion needs |k| > 0")
    om = np.asarray(omega, dtype=float)
    scalar = om.ndim == 0
    om = np.atleast_1d(om)
    What = float(pot.hat(kmag))
    if What == 0.0 or eq.kind == "zero":
        out = np.zeros(om.shape, dtype=complex)
        return complex(out[0]) if scalar else out
    j = int(derivative)
    S_auto = _tail_horizon(eq, j)
    if horizon is not None:
        S = kmag * float(horizon)
        if S < S_auto:
            peak = np.abs(_line_profile(eq, np.linspace(0, S_auto, 2001), j)).max()
            achieved = float(np.abs(_line_profile(eq, np.array([S]), j))[0] / peak)
            raise AccuracyError(f"time horizon too short: tail/peak = {achieved:.3e} > {TAIL_TOL:g}")
    else:
        S = S_auto
    u_all = om / kmag
    out = np.empty(om.shape, dtype=complex)
    order = np.argsort(np.abs(u_all), kind="stable")
    for start in range(0, order.size, _CHUNK):
        idx = order[start:start + _CHUNK]
        u = u_all[idx]
        umax = float(np.max(np.abs(u)))
        width = min(0.5, 1.0 / max(umax, 1e-12)) / refine
        nodes, weights = gq.uniform_panels(0.0, S, max(16 * refine, math.ceil(S / width)), 16)
        prof = weights * _line_profile(eq, nodes, j)
        phase = np.exp(-1j * np.outer(u, nodes))
        out[idx] = phase @ prof
    out *= -What * kmag ** (-j)
    return complex(out[0]) if scalar else out


def _marginal_derivative(eq: Equilibrium):
    if eq.kind == "maxwellian":
        th, m = eq.temperature, eq.mass
        c = m * (2 * math.pi * th) ** -0.5
        return lambda r: -r / th * c * math.exp(-r * r / (2 * th))
    if eq.kind == "tabulated" and eq.dimension == 3:
        tab = eq.table
        return lambda r: -2 * math.pi * r * float(tab(abs(r)))
    return lambda r: float(marginal(eq, r)[1])


def _principal_value(gp, u: float, R: float, tol: float = 1e-8, delta: float = 0.5, max_shrinks: int = 16):
    """p.v.∫ g'(r)/(r−u) dr by symmetric excision around r = u.

    Outside [u−δ, u+δ] the integrand is regular.  Inside, the two halves are
    paired as ∫ (g'(u+x) − g'(u−x))/x dx over x ∈ [ε, δ], and ε shrinks by ten
    until two successive values agree to `tol`.
    """
    lo, hi = -R, R
    opts = dict(epsabs=1e-14, epsrel=1e-12, limit=400)
    outer = 0.0
    f = lambda r: gp(r) / (r - u)
    if u - delta > lo:
        outer += integrate.quad(f, lo, min(u - delta, hi), **opts)[0] if min(u - delta, hi) > lo else 0.0
    if u + delta < hi:
        outer += integrate.quad(f, max(u + delta, lo), hi, **opts)[0] if hi > max(u + delta, lo) else 0.0
    if u - delta >= hi or u + delta <= lo:
        return outer
    paired = lambda x: (gp(u + x) - gp(u - x)) / x
    eps_prev = delta
    inner = 0.0
    for _ in range(max_shrinks):
        eps = eps_prev / 10.0
        piece = integrate.quad(paired, eps, eps_prev, **opts)[0]
        inner += piece
        if abs(piece) <= tol * (1.0 + abs(outer + inner)):
            return outer + inner
        eps_prev = eps
    raise QuadratureError(f"principal value at u={u:.6g} did not settle after {max_shrinks} excision radii")


def dispersion_penrose(eq: Equilibrium, pot: Potential, omega, k, *, pv_tol: float = 1e-8):
    """Ŵ(k)·(p.v.∫(f⁰_k)′(r)/(r−ω/|k|) dr − iπ(f⁰_k)′(ω/|k|)), before the convention constant."""
    kmag = _kmag(k)
    if kmag <= 0:
        raise ValidationError("dispersion needs |k| > 0")
    om = np.asarray(omega, dtype=float)
    scalar = om.ndim == 0
    om = np.atleast_1d(om)
    What = float(pot.hat(kmag))
    if What == 0.0 or eq.kind == "zero":
        out = np.zeros(om.shape, dtype=complex)
        return complex(out[0]) if scalar else out
    gp = _marginal_derivative(eq)
    R = eq.velocity_extent()
    out = np.empty(om.shape, dtype=complex)
    for i, w in enumerate(om):
        u = w / kmag
        out[i] = What * (_principal_value(gp, u, R, tol=pv_tol) - 1j * math.pi * gp(u))
    return complex(out[0]) if scalar else out


@lru_cache(maxsize=8)
def convention_constant(dimension: int = 3) -> complex:
    """Least-squares constant c with 𝓛_time ≈ c·𝓛_penrose at (maxwellian, α=1, ω=1, |k|=1)."""
    eq = Equilibrium.maxwellian(dimension)
    pot = Potential.screened(1.0)
    t = np.atleast_1d(dispersion_time(eq, pot, 1.0, 1.0, refine=4))
    p = np.atleast_1d(dispersion_penrose(eq, pot, 1.0, 1.0))
    return complex(np.vdot(p, t) / np.vdot(p, p))


def large_ratio_asymptotics(eq: Equilibrium, pot: Potential, k, omega, *, tail_cut_M: float = 50.0):
    """Leading large-ω/|k| form of 𝓛: real part −(|k|²Ŵ/ω²)·c·∫(f⁰_k)′(r) r dr, plus the exact Landau term."""
    kmag = _kmag(k)
    om = float(omega)
    if kmag <= 0:
        raise ValidationError("dispersion needs |k| > 0")
    if abs(om) / kmag <= tail_cut_M:
        raise DomainError(f"ratio ω/|k| = {abs(om) / kmag:.4g} is inside the non-asymptotic band (≤ {tail_cut_M})")
    What = float(pot.hat(kmag))
    if What == 0.0 or eq.kind == "zero":
        return 0j
    c = convention_constant(eq.dimension).real
    gp = _marginal_derivative(eq)
    R = eq.velocity_extent()
    moment = integrate.quad(lambda r: gp(r) * r, -R, R, epsabs=1e-15, epsrel=1e-12, limit=200)[0]
    real = -(kmag ** 2) * What / om ** 2 * c * moment
    return complex(real, -math.pi * c * What * gp(om / kmag))


def asymptotic_values(eq: Equilibrium, pot: Potential, k, omega):
    """Vectorized large-ratio form of 𝓛; relative error O((|k|/ω)²)."""
    kmag = _kmag(k)
    om = np.asarray(omega, dtype=float)
    What = float(pot.hat(kmag))
    if What == 0.0 or eq.kind == "zero":
        return np.zeros(om.shape, dtype=complex)
    c = convention_constant(eq.dimension).real
    gp = _marginal_derivative(eq)
    R = eq.velocity_extent()
    moment = integrate.quad(lambda r: gp(r) * r, -R, R, epsabs=1e-15, epsrel=1e-12, limit=200)[0]
    u = om / kmag
    imag = np.array([-math.pi * c * What * gp(x) for x in u.ravel()]).reshape(u.shape)
    return -(kmag ** 2) * What / om ** 2 * c * moment + 1j * imag


@dataclass(frozen=True)
class DispersionGrid:
    omega_samples: tuple
    kmag_samples: tuple
    tail_cut_m: float = 0.05
    tail_cut_M: float = 50.0
    time_refine: int = 1
    time_horizon: float | None = None

    def __post_init__(self):
        om = tuple(float(w) for w in self.omega_samples)
        ks = tuple(float(k) for k in self.kmag_samples)
        if not om or not ks:
            raise ValidationError("dispersion grid needs frequencies and wavenumbers")
        if any(k <= 0 for k in ks):
            raise ValidationError("kmag_samples must be strictly positive")
        if not (0 < self.tail_cut_m < self.tail_cut_M < math.inf):
            raise ValidationError("need 0 < tail_cut_m < tail_cut_M < inf")
        object.__setattr__(self, "omega_samples", om)
        object.__setattr__(self, "kmag_samples", ks)

    @classmethod
    def from_ratios(cls, kmags, ratios, **kw):
        """Grid whose frequencies realize the given ω/|k| ratios at every listed |k|."""
        om = sorted({float(r) * float(k) for k in kmags for r in ratios})
        return cls(tuple(om), tuple(kmags), **kw)

    @classmethod
    def standard(cls, kmags=(0.25, 1.0, 4.0), n_band=48, **kw):
        ratios = np.concatenate((
            [0.0, 0.01, 0.03],
            np.geomspace(0.05, 50.0, n_band),
            [80.0, 200.0, 1000.0],
        ))
        om = sorted({float(r) * float(k) for k in kmags for r in ratios})
        return cls(tuple(om), tuple(kmags), **kw)


@dataclass
class StabilityReport:
    kappa: float
    argmin: tuple
    method_agreement: float
    winding_ok: dict
    small_data_margin: float
    convention_constant: complex
    convention_spread: float
    small_ratio_bound_ok: bool
    cross_validation_ok: bool
    rows: list = field(default_factory=list, repr=False)

    @property
    def unstable(self) -> bool:
        return not all(self.winding_ok.values())

    def to_dict(self):
        c = self.convention_constant
        return {
            "kappa": self.kappa,
            "argmin": {"omega": self.argmin[0], "kmag": self.argmin[1]},
            "method_agreement": self.method_agreement,
            "winding_ok": {f"{k:.17g}": v for k, v in self.winding_ok.items()},
            "unstable": self.unstable,
            "small_data_margin": self.small_data_margin,
            "convention_constant": {"real": c.real, "imag": c.imag},
            "convention_spread": self.convention_spread,
            "small_ratio_bound_ok": self.small_ratio_bound_ok,
            "cross_validation_ok": self.cross_validation_ok,
        }


def winding_number(eq: Equilibrium, pot: Potential, kmag: float, *, u_max: float = 200.0, n: int = 4001) -> int:
    """Winding of ω ↦ 1 − 𝓛(iω,k) about 0 along the imaginary axis, closed through infinity."""
    u = np.unique(np.concatenate((np.linspace(0.0, 20.0, n), np.geomspace(20.0, u_max, 200))))
    vals = 1.0 - dispersion_time(eq, pot, u * kmag, kmag)
    full = np.concatenate((np.conj(vals[:0:-1]), vals))
    phase = np.unwrap(np.angle(full))
    closing = np.angle(full[0] / full[-1])
    return int(round((phase[-1] - phase[0] + closing) / (2 * math.pi)))


def _sweep_one_k(eq, pot, grid, kmag, c):
    m, M = grid.tail_cut_m, grid.tail_cut_M
    om = np.array(sorted({abs(w) for w in grid.omega_samples}))
    u = om / kmag
    small = u < m
    large = u > M
    band = ~small & ~large
    L = np.empty(om.shape, dtype=complex)
    zone = np.empty(om.shape, dtype=object)
    near = ~large
    if near.any():
        L[near] = dispersion_time(eq, pot, om[near], kmag, horizon=None, refine=grid.time_refine)
    disc = np.zeros(om.shape)
    ratios = []
    if band.any():
        P = dispersion_penrose(eq, pot, om[band], kmag)
        T = L[band]
        disc[band] = np.abs(T - c * P) / (1 + np.abs(T))
        ok = np.abs(P) > 1e-3 * np.abs(P).max() if np.abs(P).max() > 0 else np.zeros(P.shape, bool)
        ratios = list(T[ok] / P[ok])
    for i in np.nonzero(large)[0]:
        L[i] = large_ratio_asymptotics(eq, pot, kmag, om[i], tail_cut_M=M)
    zone[small], zone[band], zone[large] = "small", "band", "large"
    wind = winding_number(eq, pot, kmag) if (eq.kind != "zero" and float(pot.hat(kmag)) != 0) else 0
    rows = [(float(w), kmag, str(z), float(abs(x - 1)), float(x.real), float(x.imag), float(dd))
            for w, z, x, dd in zip(om, zone, L, disc)]
    small_ok = bool(np.all(np.abs(L[small] - 1) >= 0.5)) if small.any() else True
    return rows, wind, small_ok, ratios


def stability_margin(eq: Equilibrium, pot: Potential, grid: DispersionGrid, *, agreement_tol: float = 1e-6,
                     strict: bool = False, threads: int = 1, sobolev_surplus: float = 0.01) -> StabilityReport:
    """κ = min |𝓛(iω,k) − 1| over the grid with the three-zone treatment and a Nyquist check per k."""
    c_full = convention_constant(eq.dimension)
    c = c_full.real
    work = lambda k: _sweep_one_k(eq, pot, grid, k, c)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, grid.kmag_samples))
    else:
        results = [work(k) for k in grid.kmag_samples]
    rows, winding, small_ok, ratios = [], {}, True, []
    for k, (r, w, s_ok, rat) in zip(grid.kmag_samples, results):
        rows.extend(r)
        winding[k] = (w == 0)
        small_ok &= s_ok
        ratios.extend(rat)
    dist = np.array([r[3] for r in rows])
    i = int(np.argmin(dist))
    agreement = float(max((r[6] for r in rows), default=0.0))
    spread = float(np.max(np.abs(np.array(ratios) / c - 1))) if ratios else 0.0
    report = StabilityReport(
        kappa=float(dist[i]),
        argmin=(rows[i][0], rows[i][1]),
        method_agreement=agreement,
        winding_ok=winding,
        small_data_margin=small_data_check(eq, pot, surplus=sobolev_surplus),
        convention_constant=c_full,
        convention_spread=spread,
        small_ratio_bound_ok=small_ok,
        cross_validation_ok=agreement <= agreement_tol,
        rows=rows,
    )
    if strict and not report.cross_validation_ok:
        raise CrossValidationError(f"dispersion routes disagree by {agreement:.3e} > {agreement_tol:g}")
    return report


def small_data_check(eq: Equilibrium, pot: Potential, *, surplus: float = 0.01, n: int = 64) -> float:
    """‖W‖_{L¹}·‖f⁰‖_{H^{3/2+surplus}_2}."""
    if eq.kind == "zero" or pot.kind == "zero":
        return 0.0
    return potential_l1_norm(pot, eq.dimension) * equilibrium_sobolev_norm(eq, 1.5 + surplus, 2, n=n)


def derivative_bound_check(eq: Equilibrium, pot: Potential, j: int, zeta_surplus: float, grid: DispersionGrid,
                           *, n: int = 64) -> float:
    """Least C with |k|^j |∂_ω^j 𝓛(iω,k)| ≤ C·‖W‖_{L¹}‖f⁰‖_{H^{j+3/2+ζ}_2} over the grid."""
    if int(j) != j or j < 0:
        raise ValidationError("derivative order must be a nonnegative integer")
    if eq.kind == "zero" or pot.kind == "zero":
        return 0.0
    rhs = potential_l1_norm(pot, eq.dimension) * equilibrium_sobolev_norm(eq, j + 1.5 + zeta_surplus, 2, n=n)
    om = np.array(grid.omega_samples)
    best = 0.0
    for kmag in grid.kmag_samples:
        lhs = kmag ** j * np.abs(dispersion_time(eq, pot, om, kmag, derivative=j, refine=grid.time_refine))
        best = max(best, float(lhs.max()))
    return best / rhs
