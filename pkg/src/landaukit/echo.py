"""Plasma-echo time-response kernel and its Schur row/column sums.

K̄(t,τ,k,ℓ) = P |k|^{1/2} |ℓ|^{1/2} ⟨τ⟩ / (⟨ℓ⟩² ⟨k−ℓ, kt−ℓτ⟩^β).

The decomposed route completes the square in the bracket,

    1 + |k−ℓ|² + |kt−ℓτ|² = R + (1+τ²)|ℓ − c k̂|²,

so the ℓ-integral becomes an isotropic profile centered on the echo line.
After rescaling by σ = (R/(1+τ²))^{1/2} and a tangent map in cylindrical
coordinates, the resonant cylinder is a curve in the mapped plane and each
zone is integrated separately.  The oracle integrates the raw kernel over
(τ, ℓ_∥, |ℓ_⊥|) with nested adaptive quadrature.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from . import _cylquad as _cq
from . import _quadrature as gq
from .errors import DegenerateDirectionError, RegimeWarning, UnsupportedError, ValidationError
from .model import sphere_area

__all__ = [
    "EchoParams",
    "ResonantCylinder",
    "SchurSum",
    "LatticeSum",
    "RegimeVerdict",
    "kernel_bound",
    "resonant_region",
    "row_sum",
    "column_sum",
    "lattice_row_sum",
    "echo_time_prediction",
    "regime_study",
    "STANDARD_TIMES",
    "STANDARD_KMAGS",
    "STANDARD_TAUS",
]

STANDARD_TIMES = (10.0, 20.0, 40.0, 80.0)
STANDARD_KMAGS = (0.25, 1.0, 4.0, 16.0)
STANDARD_TAUS = (0.0, 1.0, 5.0)


@dataclass(frozen=True)
class EchoParams:
    beta: float
    zeta: float = 0.9
    b: float | None = None
    dimension: int = 3
    horizon: float = 80.0
    prefactor: float = 1.0
    enforce_regime: bool = False

    def __post_init__(self):
        if not self.beta > 0:
            raise ValidationError("beta must be positive")
        if self.b is None:
            object.__setattr__(self, "b", 1.0 / self.beta)
        elif not math.isclose(self.b, 1.0 / self.beta, rel_tol=1e-12):
            raise ValidationError(f"b must equal 1/beta = {1.0 / self.beta:.6g}, got {self.b}")
        if self.dimension < 3:
            raise UnsupportedError("echo kernel sums need dimension >= 3 (d = 2 is too weak)")
        if not self.horizon > 0 or self.prefactor < 0:
            raise ValidationError("horizon must be positive and prefactor nonnegative")
        if self.enforce_regime and not self.in_regime:
            warnings.warn(
                f"beta={self.beta:g}, zeta={self.zeta:g} outside beta > 10, zeta in (4/5, 1); "
                "sums are computed but uniform bounds are not expected",
                RegimeWarning,
                stacklevel=2,
            )

    @property
    def in_regime(self) -> bool:
        return self.beta > 10 and 0.8 < self.zeta < 1.0


def _vec(x, d):
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = np.concatenate(([float(a)], np.zeros(d - 1)))
    if a.shape[-1] != d:
        raise ValidationError(f"expected {d}-vectors")
    return a


def kernel_bound(t, tau, k, l, params: EchoParams):
    """K̄(t,τ,k,ℓ); broadcasts over leading axes of k and ℓ."""
    d = params.dimension
    k, l = _vec(k, d), _vec(l, d)
    kn = np.sqrt(np.sum(k * k, axis=-1))
    ln2 = np.sum(l * l, axis=-1)
    diff = k - l
    shift = k * t - l * tau
    br2 = 1.0 + np.sum(diff * diff, axis=-1) + np.sum(shift * shift, axis=-1)
    val = params.prefactor * np.sqrt(kn) * ln2 ** 0.25 * math.sqrt(1 + tau * tau) / (1 + ln2) / br2 ** (params.beta / 2)
    return float(val) if np.ndim(val) == 0 else val


@dataclass(frozen=True)
class ResonantCylinder:
    axis: np.ndarray
    radius: float
    cross_section: float

    def contains(self, l) -> bool:
        l = np.asarray(l, dtype=float)
        perp = l - np.dot(l, self.axis) * self.axis
        return bool(np.linalg.norm(perp) < self.radius)


def _radius(tau, kmag, params):
    return (1.0 + tau) ** (-params.zeta) * kmag ** params.b


def resonant_region(tau, k, params: EchoParams) -> ResonantCylinder:
    """I_R = {ℓ : |ℓ_⊥| < (1+τ)^{−ζ}|k|^b} around span(k)."""
    k = _vec(k, params.dimension)
    kmag = float(np.linalg.norm(k))
    if kmag == 0:
        raise DegenerateDirectionError("resonant cylinder undefined for k = 0")
    r = _radius(tau, kmag, params)
    n = params.dimension - 1
    area = math.pi ** (n / 2) / math.gamma(n / 2 + 1) * r ** n
    return ResonantCylinder(k / kmag, r, area)


def echo_time_prediction(l, tau, k):
    """t = (ℓ·k̂)τ/|k|, the stationary point of kt − ℓτ; None when k·ℓ ≤ 0."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    l = np.atleast_1d(np.asarray(l, dtype=float))
    kmag = float(np.linalg.norm(k))
    if kmag == 0:
        raise DegenerateDirectionError("echo time needs |k| > 0")
    dot = float(np.dot(l, k))
    if dot <= 0:
        return None
    return dot / kmag * tau / kmag


# ---------------------------------------------------------------------------
# mapped cylindrical rule

def _graded_edges(a, b, levels, toward=(True, True)):
    m = 0.5 * (a + b)
    h = 0.5 * (b - a)
    g = 2.0 ** -np.arange(1, levels + 1)
    left = a + h * g[::-1] if toward[0] else np.array([])
    right = b - h * g if toward[1] else np.array([])
    pts = np.concatenate(([a], left, [m], right, [b]))
    return np.unique(pts)


@lru_cache(maxsize=32)
def _a_rule(a0, levels, order):
    edges = np.unique(np.concatenate((
        _graded_edges(-math.pi / 2, a0, levels),
        _graded_edges(a0, math.pi / 2, levels),
    )))
    return gq.panels(edges, order)


@lru_cache(maxsize=8)
def _unit_rule(levels, order):
    """Rule on [0,1] graded toward both ends."""
    return gq.panels(_graded_edges(0.0, 1.0, levels), order)


def _profile(y2, kind):
    y = np.sqrt(y2)
    if kind == "row":
        return np.sqrt(y) / (1.0 + y2)
    return np.sqrt(y)


def _cylinder_integral(center, sigma, radius, kind, beta, d, levels=12, order=8):
    """(inside, outside) of ∫ (1+|x|²)^{−β/2} φ(|center·ê + σx|) dx split by σ|x_⊥| < radius."""
    a0 = math.atan(-center / sigma)
    A, wA = _a_rule(round(a0, 15), levels, order)
    U, wU = _unit_rule(levels, order)
    cosA = np.cos(A)
    tanA = np.tan(A)
    BR = np.arctan(radius * cosA / sigma)
    wa = wA * cosA ** (beta - d - 1)
    par = center + sigma * tanA
    shell = sphere_area(d - 2)
    out = []
    for lo, hi in ((np.zeros_like(BR), BR), (BR, np.full_like(BR, math.pi / 2))):
        span = hi - lo
        B = lo[:, None] + span[:, None] * U[None, :]
        wB = span[:, None] * wU[None, :]
        cosB = np.cos(B)
        y2 = par[:, None] ** 2 + (sigma / cosA[:, None]) ** 2 * np.tan(B) ** 2
        f = np.sin(B) ** (d - 2) * cosB ** (beta - d) * _profile(y2, kind)
        out.append(shell * float(np.sum(wa[:, None] * wB * f)))
    return out[0], out[1]


def _row_converges(beta, d):
    return beta > d - 1.5


def _column_converges(beta, d):
    return beta > d + 0.5


def _row_tau_density(tau, t, kmag, params, **kw):
    d, beta = params.dimension, params.beta
    q = 1.0 + tau * tau
    R = 1.0 + kmag * kmag * (t - tau) ** 2 / q
    sigma = math.sqrt(R / q)
    center = (1.0 + t * tau) / q * kmag
    ins, outs = _cylinder_integral(center, sigma, _radius(tau, kmag, params), "row", beta, d, **kw)
    pref = params.prefactor * math.sqrt(kmag) * math.sqrt(q) * R ** (-beta / 2) * sigma ** d
    return pref * ins, pref * outs


def _column_t_density(t, tau, lmag, params, **kw):
    d, beta = params.dimension, params.beta
    q = 1.0 + t * t
    R = 1.0 + lmag * lmag * (t - tau) ** 2 / q
    sigma = math.sqrt(R / q)
    center = (1.0 + t * tau) / q * lmag
    ins, outs = _cylinder_integral(center, sigma, _radius(t, lmag, params), "column", beta, d, **kw)
    pref = (params.prefactor * math.sqrt(lmag) / (1 + lmag * lmag) * math.sqrt(1 + tau * tau)
            * R ** (-beta / 2) * sigma ** d)
    return pref * ins, pref * outs


@dataclass
class SchurSum:
    """One row or column sum split into early-time, resonant and non-resonant parts."""

    mode: str
    probe: tuple
    early: float
    resonant: float
    nonresonant: float
    method: str

    @property
    def total(self) -> float:
        return self.early + self.resonant + self.nonresonant

    @property
    def resonant_share(self) -> float:
        tot = self.total
        if not math.isfinite(tot):
            return math.nan
        return self.resonant / tot if tot > 0 else 0.0


def _zone_integrals(density, lo, early_end, hi, epsrel):
    """Integrate a (inside, outside) density over [lo, early_end] (early) and [early_end, hi]."""
    f = lambda s: np.array(density(s))
    early = 0.0
    if early_end > lo:
        early = float(np.sum(integrate.quad_vec(f, lo, early_end, epsrel=epsrel, epsabs=0)[0]))
    res = nres = 0.0
    if hi > early_end:
        v = integrate.quad_vec(f, early_end, hi, epsrel=epsrel, epsabs=0)[0]
        res, nres = float(v[0]), float(v[1])
    return early, res, nres


def _kmag_of(k, d):
    return float(np.linalg.norm(_vec(k, d)))


def row_sum(t, k, params: EchoParams, method: str = "decomposed", *, epsrel: float = 1e-6) -> SchurSum:
    """∫₀ᵗ ∫ K̄(t,τ,k,ℓ) dℓ dτ with early / resonant / non-resonant parts."""
    d = params.dimension
    kmag = _kmag_of(k, d)
    if kmag == 0:
        raise DegenerateDirectionError("row sum needs |k| > 0")
    t = float(t)
    probe = (t, kmag)
    if t <= 0:
        return SchurSum("row", probe, 0.0, 0.0, 0.0, method)
    if not _row_converges(params.beta, d):
        return SchurSum("row", probe, math.inf, math.inf, math.inf, method)
    t0 = min(1.0, t)
    if method == "decomposed":
        dens = lambda tau: _row_tau_density(tau, t, kmag, params)
        e, r, n = _zone_integrals(dens, 0.0, t0, t, epsrel)
    elif method == "oracle":
        e, r, n = _oracle_row(t, kmag, params, t0)
    else:
        raise ValidationError(f"unknown method {method!r}")
    return SchurSum("row", probe, e, r, n, method)


def column_sum(tau, l, params: EchoParams, method: str = "decomposed", *, horizon=None,
               epsrel: float = 1e-6) -> SchurSum:
    """∫_τ^{T★} ∫ K̄(t,τ,k,ℓ) dk dt with the resonant cylinder around span(ℓ)."""
    d = params.dimension
    lmag = _kmag_of(l, d)
    if lmag == 0:
        raise DegenerateDirectionError("column sum needs |l| > 0")
    T = float(params.horizon if horizon is None else horizon)
    tau = float(tau)
    probe = (tau, lmag, T)
    if T <= tau:
        return SchurSum("column", probe, 0.0, 0.0, 0.0, method)
    if not _column_converges(params.beta, d):
        return SchurSum("column", probe, math.inf, math.inf, math.inf, method)
    t0 = min(max(1.0, tau), T)
    if method == "decomposed":
        dens = lambda t: _column_t_density(t, tau, lmag, params)
        e, r, n = _zone_integrals(dens, tau, t0, T, epsrel)
    elif method == "oracle":
        e, r, n = _oracle_column(tau, lmag, T, params, t0)
    else:
        raise ValidationError(f"unknown method {method!r}")
    return SchurSum("column", probe, e, r, n, method)


# ---------------------------------------------------------------------------
# oracle: nested adaptive quadrature in the original cylindrical variables

_ORACLE_EPS = 1e-5


def _oracle_density(s, fixed_mag, fixed_coef, params, row, zone):
    """Plane integral at one time slice; s is the integration time (τ for rows, t for columns)."""
    beta, d = params.beta, params.dimension
    q2 = 1.0 + s * s
    if row:
        t, tau = fixed_coef, s
    else:
        t, tau = s, fixed_coef
    center = (1.0 + t * tau) / q2 * fixed_mag
    scale = math.sqrt((1.0 + fixed_mag ** 2 * (t - tau) ** 2 / q2) / q2)
    prm = np.zeros(_cq.N_PARAMS)
    prm[_cq.M] = fixed_mag
    prm[_cq.CF] = fixed_coef
    prm[_cq.CV] = s
    prm[_cq.BETA] = beta
    prm[_cq.DIM] = d
    prm[_cq.KIND] = 0.0 if row else 1.0
    prm[_cq.QR] = _radius(s, fixed_mag, params)
    offs = np.array([-10.0, -1.0, 0.0, 1.0, 10.0])
    pbreaks = np.unique(np.concatenate((center + scale * offs, [0.0])))
    qbreaks = prm[_cq.QR] + scale * np.array([1.0, 10.0])
    return sphere_area(d - 2) * _cq.plane_integral(prm, zone, pbreaks, qbreaks, _ORACLE_EPS)


def _oracle_sum(row, lo, t0, hi, fixed_mag, fixed_coef, amp, params):
    opts = dict(epsabs=0.0, epsrel=1e-5, limit=200)
    dens = lambda s, z: amp(s) * _oracle_density(s, fixed_mag, fixed_coef, params, row, z)
    early = res = nres = 0.0
    if t0 > lo:
        early = integrate.quad(lambda s: dens(s, 0) + dens(s, 1), lo, t0, **opts)[0]
    if hi > t0:
        res = integrate.quad(lambda s: dens(s, 0), t0, hi, **opts)[0]
        nres = integrate.quad(lambda s: dens(s, 1), t0, hi, **opts)[0]
    return early, res, nres


def _oracle_row(t, kmag, params, t0):
    amp = lambda tau: params.prefactor * math.sqrt(kmag) * math.sqrt(1 + tau * tau)
    return _oracle_sum(True, 0.0, t0, t, kmag, t, amp, params)


def _oracle_column(tau, lmag, T, params, t0):
    c = params.prefactor * math.sqrt(lmag) / (1 + lmag * lmag) * math.sqrt(1 + tau * tau)
    return _oracle_sum(False, tau, t0, T, lmag, tau, lambda t: c, params)


# ---------------------------------------------------------------------------
# lattice contrast

@dataclass
class LatticeSum:
    total: float
    resonant: float
    tail_bound: float
    n_terms: int
    radius: int

    @property
    def resonant_share(self) -> float:
        return self.resonant / self.total if self.total > 0 else 0.0


def _lattice_points(L, d):
    rng = np.arange(-L, L + 1)
    grids = np.meshgrid(*([rng] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    n2 = np.sum(pts * pts, axis=-1)
    return pts[(n2 > 0) & (n2 <= L * L)].astype(float)


def _tau_integrals(t, k, ls, params, order=48):
    """∫₀ᵗ K̄(t,τ,k,ℓ) dτ for each ℓ, via τ = τ* + w·tan θ around the bracket minimum."""
    beta = params.beta
    kmag = float(np.linalg.norm(k))
    lmag2 = np.sum(ls * ls, axis=1)
    kl = ls @ k
    diff2 = np.sum((k - ls) ** 2, axis=1)
    tstar = t * kl / lmag2
    qmin = 1.0 + diff2 + t * t * (kmag * kmag - kl * kl / lmag2)
    w = np.sqrt(qmin / lmag2)
    th0 = np.arctan((0.0 - tstar) / w)
    th1 = np.arctan((t - tstar) / w)
    x, wx = gq.legendre(order)
    # three panels in θ keep the rule accurate when the window is lopsided
    total = np.zeros(ls.shape[0])
    cuts = np.linspace(0.0, 1.0, 4)
    for a, b in zip(cuts[:-1], cuts[1:]):
        lo = th0 + (th1 - th0) * a
        hi = th0 + (th1 - th0) * b
        half = 0.5 * (hi - lo)
        th = lo[:, None] + half[:, None] * (x[None, :] + 1)
        tau = tstar[:, None] + w[:, None] * np.tan(th)
        f = np.sqrt(1 + tau * tau) * np.cos(th) ** (beta - 2)
        total += half * (f @ wx)
    amp = params.prefactor * math.sqrt(kmag) * lmag2 ** 0.25 / (1 + lmag2)
    return amp * w * qmin ** (-beta / 2) * total


def lattice_row_sum(t, k_lattice, params: EchoParams, *, radius: int = 12) -> LatticeSum:
    """Σ_{ℓ ∈ ℤᵈ∖{0}, |ℓ| ≤ radius} ∫₀ᵗ K̄ dτ, the ℓ ∥ k terms forming the resonant part."""
    d = params.dimension
    k = _vec(k_lattice, d)
    if np.any(k != np.round(k)) or not np.any(k):
        raise ValidationError("k must be a nonzero lattice vector")
    t = float(t)
    kmag = float(np.linalg.norm(k))
    if t <= 0:
        return LatticeSum(0.0, 0.0, 0.0, 0, radius)
    ls = _lattice_points(radius, d)
    vals = _tau_integrals(t, k, ls, params)
    cross = ls * kmag ** 2 - np.outer(ls @ k, k)
    parallel = np.all(np.abs(cross) < 1e-9, axis=1)
    return LatticeSum(float(vals.sum()), float(vals[parallel].sum()),
                      _lattice_tail(t, kmag, radius, params), int(ls.shape[0]), radius)


def _lattice_tail(t, kmag, L, params):
    """Upper bound for the terms with |ℓ| > L (needs L ≥ 2|k| + 1)."""
    d, beta = params.dimension, params.beta
    if L < 2 * kmag + 1:
        return math.inf
    gamma = beta + 1.5
    if gamma <= d:
        return math.inf
    h = math.sqrt(d) / 2
    inflate = (1 + h / (L - h)) ** gamma
    sum_bound = inflate * sphere_area(d - 1) * (L - h) ** (d - gamma) / (gamma - d)
    return params.prefactor * math.sqrt(kmag) * t * math.sqrt(1 + t * t) * 2 ** beta * sum_bound


# ---------------------------------------------------------------------------
# horizon-doubling study

@dataclass
class RegimeVerdict:
    beta: float
    zeta: float
    rows: list = field(default_factory=list)
    columns: list = field(default_factory=list)
    row_sups: list = field(default_factory=list)
    column_sups: list = field(default_factory=list)
    horizons: tuple = STANDARD_TIMES
    max_disagreement: float = 0.0

    @staticmethod
    def _ratios(sups):
        out = []
        for a, b in zip(sups[:-1], sups[1:]):
            out.append(b / a if (math.isfinite(a) and math.isfinite(b) and a > 0) else math.nan)
        return out

    @property
    def row_ratios(self):
        return self._ratios(self.row_sups)

    @property
    def column_ratios(self):
        return self._ratios(self.column_sups)

    @property
    def stabilized(self) -> bool:
        ratios = self.row_ratios + self.column_ratios
        return bool(ratios) and all(math.isfinite(r) and abs(r - 1) <= 0.10 for r in ratios)

    def growth(self, sups):
        a, b = sups[0], sups[-1]
        if not (math.isfinite(a) and math.isfinite(b)) or a <= 0:
            return math.nan
        return b / a

    @property
    def row_growth(self):
        return self.growth(self.row_sups)

    @property
    def column_growth(self):
        return self.growth(self.column_sups)

    def to_dict(self):
        return {
            "beta": self.beta,
            "zeta": self.zeta,
            "stabilized": self.stabilized,
            "horizons": list(self.horizons),
            "row_running_sup": self.row_sups,
            "column_sup": self.column_sups,
            "row_ratios": self.row_ratios,
            "column_ratios": self.column_ratios,
            "row_growth": self.row_growth,
            "column_growth": self.column_growth,
            "max_disagreement": self.max_disagreement,
        }


def _rel(a, b):
    if math.isinf(a) and math.isinf(b):
        return 0.0
    return abs(a - b) / max(abs(b), 1e-300)


def regime_study(params: EchoParams, *, times=STANDARD_TIMES, kmags=STANDARD_KMAGS, taus=STANDARD_TAUS,
                 with_oracle: bool = True, threads: int = 1) -> RegimeVerdict:
    """Horizon-doubling study of row sums (running sup over probe times) and column sups over (τ, |ℓ|)."""
    d = params.dimension
    e1 = np.eye(d)[0]
    row_jobs = [(t, km) for t in times for km in kmags]
    col_jobs = [(T, tau, lm) for T in times for tau in taus for lm in kmags if tau < T]

    def do_row(job):
        t, km = job
        dec = row_sum(t, km * e1, params, "decomposed")
        orc = row_sum(t, km * e1, params, "oracle") if with_oracle else None
        return dec, orc

    def do_col(job):
        T, tau, lm = job
        dec = column_sum(tau, lm * e1, params, "decomposed", horizon=T)
        orc = column_sum(tau, lm * e1, params, "oracle", horizon=T) if with_oracle else None
        return dec, orc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(do_row, row_jobs))
            cols = list(ex.map(do_col, col_jobs))
    else:
        rows = [do_row(j) for j in row_jobs]
        cols = [do_col(j) for j in col_jobs]
    verdict = RegimeVerdict(params.beta, params.zeta, rows=rows, columns=cols, horizons=tuple(times))
    disagreement = 0.0
    for dec, orc in rows + cols:
        if orc is not None:
            disagreement = max(disagreement, _rel(dec.total, orc.total))
    verdict.max_disagreement = disagreement
    for T in times:
        vals = [dec.total for (dec, _), (t, _) in zip(rows, row_jobs) if t <= T]
        verdict.row_sups.append(max(vals))
        cvals = [dec.total for (dec, _), (TT, _, _) in zip(cols, col_jobs) if TT == T]
        verdict.column_sups.append(max(cvals))
    return verdict
