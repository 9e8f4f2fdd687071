"""Weighted multipliers, bootstrap controls, initial-data norms and decay fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import _quadrature as gq
from .errors import HypothesisError, IncompleteDiagnosticError, InsufficientDataError, UnsupportedError, ValidationError
from .model import joint_bracket, weighted_sobolev_norm

__all__ = [
    "WeightSpec",
    "BootstrapSpec",
    "BootstrapRecord",
    "DecayFit",
    "InitialDataNorms",
    "a_multiplier",
    "bootstrap_norms",
    "initial_data_norms",
    "initial_data_norms_oracle",
    "dispersive_integral",
    "dispersive_decay_check",
    "decay_fit",
    "envelope_constant",
]

QUADRATURE_TOL = 0.05


@dataclass(frozen=True)
class WeightSpec:
    kind: str = "sobolev"
    s: float = 0.0
    lam: float | None = None
    half_power: bool = True

    def __post_init__(self):
        if self.kind not in ("sobolev", "analytic"):
            raise ValidationError("weight kind must be sobolev or analytic")
        if self.kind == "sobolev" and self.s < 0:
            raise ValidationError("s must be nonnegative")
        if self.kind == "analytic" and not (self.lam is not None and self.lam > 0):
            raise ValidationError("analytic weights need lam > 0")


def a_multiplier(spec: WeightSpec, t, k):
    """|k|^{1/2}⟨k,tk⟩^s, or e^{λ⟨k,kt⟩} for analytic weights (times |k|^{1/2} if half_power)."""
    k = np.asarray(k, dtype=float)
    kmag = np.sqrt(np.sum(k * k, axis=-1)) if k.ndim and k.shape[-1] > 1 and k.ndim > 1 else np.abs(k)
    t = np.asarray(t, dtype=float)
    br = joint_bracket(kmag, kmag * t)
    w = br ** spec.s if spec.kind == "sobolev" else np.exp(spec.lam * br)
    if spec.half_power:
        w = np.sqrt(kmag) * w
    return float(w) if np.ndim(w) == 0 else w


# ---------------------------------------------------------------------------
# bootstrap controls

@dataclass(frozen=True)
class BootstrapSpec:
    sigma1: float = 11.0
    sigma2: float = 17.0
    sigma3: float = 23.0
    sigma4: float = 29.0
    sigma_bar: float = 35.0
    M: int = 2
    delta: float = 0.1
    K: tuple = (1.0, 1.0, 1.0, 1.0, 1.0)
    epsilon: float = 1e-3

    def __post_init__(self):
        if not (self.sigma_bar > self.sigma4 > self.sigma3 > self.sigma2 > self.sigma1 >= 11):
            raise ValidationError("need sigma_bar > sigma4 > sigma3 > sigma2 > sigma1 >= 11")
        if not 0 < self.delta < 0.5:
            raise ValidationError("delta must lie in (0, 1/2)")
        if len(self.K) != 5 or min(self.K) <= 0:
            raise ValidationError("need five positive budgets K1..K5")
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")


CONTROL_NAMES = (
    "hi_localized",  # ‖⟨t∇_z,∇_v⟩g‖²_{H^{σ4}_M} / ⟨t⟩⁵, sup over t
    "density_l2",  # ‖A_{σ4} ρ̂‖²_{L²_t L²_k}
    "lo_localized",  # ‖|∇_z|^δ g‖²_{H^{σ3}_M}, sup over t
    "density_chemin_lerner",  # ‖A_{σ2} ρ̂‖_{L^∞_k L²_t}
    "low_linfty",  # ‖⟨∇⟩^{σ1} ĝ‖_{L^∞_{k,η}}, sup over t
)


@dataclass
class BootstrapRecord:
    values: dict
    ratios_eps2: dict
    ratios_eps: dict
    quadrature_error: dict = field(default_factory=dict)

    @property
    def in_bootstrap(self) -> bool:
        return all(r <= 1.0 for r in self.ratios_eps2.values())

    def to_dict(self):
        return {
            "values": self.values,
            "ratios_eps2": self.ratios_eps2,
            "ratios_eps": self.ratios_eps,
            "quadrature_error": self.quadrature_error,
            "in_bootstrap": self.in_bootstrap,
        }


def _trapezoid(y, t):
    if len(t) < 2:
        return 0.0
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t), axis=0)) if y.ndim == 1 else np.sum(
        0.5 * (y[1:] + y[:-1]) * np.diff(t)[:, None], axis=0)


def _time_integral(y, t):
    """Trapezoid value and its relative change against every other sample."""
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    full = _trapezoid(y, t)
    idx = np.arange(0, len(t), 2)
    if idx[-1] != len(t) - 1:
        idx = np.append(idx, len(t) - 1)
    coarse = _trapezoid(y[idx], t[idx])
    full_arr = np.atleast_1d(full)
    coarse_arr = np.atleast_1d(coarse)
    scale = np.maximum(np.abs(full_arr), 1e-300)
    err = np.where(full_arr == 0, 0.0, np.abs(full_arr - coarse_arr) / scale)
    return full, err


def _physical_norm(sim, gh, sigma, M):
    g = sim.grid
    cfg = sim.cfg
    phys = g.to_physical(gh)
    zs = [-cfg.L_box / 2 + cfg.dz * np.arange(cfg.N_z)] * cfg.dimension
    vs = [g.v1] * cfg.dimension
    return weighted_sobolev_norm(phys, zs + vs, sigma, M,
                                 moment_axes=list(range(cfg.dimension, 2 * cfg.dimension)))


def _check_gaps(times, expected_dt):
    times = np.asarray(times, dtype=float)
    if times.size < 3:
        raise IncompleteDiagnosticError("fewer than three state samples", gaps=[(0.0, float(times[-1]) if times.size else 0.0)])
    steps = np.diff(times)
    big = np.nonzero(steps > 1.5 * expected_dt)[0]
    if big.size:
        gaps = [(float(times[i]), float(times[i + 1])) for i in big]
        raise IncompleteDiagnosticError(f"missing state samples in {gaps}", gaps=gaps)


def bootstrap_norms(history, states, spec: BootstrapSpec, sim, *, sample_dt=None) -> BootstrapRecord:
    """The five controls, each divided by its 4Kᵢε² budget (and by 4Kᵢε for the ε-normalized reading)."""
    if not states:
        raise IncompleteDiagnosticError("no state samples", gaps=[])
    s_times = np.array([s.t for s in states])
    if sample_dt is None:
        sample_dt = float(np.median(np.diff(s_times))) if len(s_times) > 1 else 0.0
    _check_gaps(s_times, sample_dt)
    g = sim.grid
    d = g.d
    k = g.k.reshape(g.k.shape[:-1] + (1,) * d + (d,))
    eta = g.eta.reshape((1,) * d + g.eta.shape)
    kmag = g.kmag.reshape(g.kmag.shape + (1,) * d)
    eta2 = np.sum(eta * eta, axis=-1)
    k2 = np.sum(k * k, axis=-1)

    hi, lo, low = [], [], []
    for st in states:
        t = st.t
        gh = np.asarray(st.g_hat)
        w = np.sqrt(1 + t * t * k2 + eta2)
        hi.append(_physical_norm(sim, w * gh, spec.sigma4, spec.M) ** 2 / (1 + t * t) ** 2.5)
        lo.append(_physical_norm(sim, kmag ** spec.delta * gh, spec.sigma3, spec.M) ** 2)
        low.append(float(np.max((1 + k2 + eta2) ** (spec.sigma1 / 2) * np.abs(gh))))

    times = np.asarray(history.times, dtype=float)
    rho = np.asarray(history.rho_hat)
    dk = 2 * math.pi / sim.cfg.L_box
    A4 = a_multiplier(WeightSpec(s=spec.sigma4), times[:, None], g.kmag.ravel()[None, :])
    A2 = a_multiplier(WeightSpec(s=spec.sigma2), times[:, None], g.kmag.ravel()[None, :])
    r2 = np.abs(rho.reshape(len(times), -1)) ** 2
    per_t = np.sum(A4 ** 2 * r2, axis=1) * dk ** d
    density_l2, err_b = _time_integral(per_t, times)
    per_k, err_d = _time_integral(A2 ** 2 * r2, times)
    per_k = np.atleast_1d(per_k)
    kbest = int(np.argmax(per_k)) if per_k.size else 0
    chemin = math.sqrt(float(per_k[kbest])) if per_k.size else 0.0
    qerr = {"density_l2": float(np.max(err_b)), "density_chemin_lerner": float(np.atleast_1d(err_d)[kbest])}
    for name, e in qerr.items():
        if e > QUADRATURE_TOL:
            raise IncompleteDiagnosticError(
                f"time-quadrature error {e:.1%} for {name} exceeds {QUADRATURE_TOL:.0%}; sample more densely",
                gaps=[(float(times[0]), float(times[-1]))],
            )
    values = {
        "hi_localized": float(max(hi)),
        "density_l2": float(density_l2),
        "lo_localized": float(max(lo)),
        "density_chemin_lerner": float(chemin),
        "low_linfty": float(max(low)),
    }
    eps = spec.epsilon
    r2d = {n: values[n] / (4 * K * eps * eps) for n, K in zip(CONTROL_NAMES, spec.K)}
    r1d = {n: values[n] / (4 * K * eps) for n, K in zip(CONTROL_NAMES, spec.K)}
    return BootstrapRecord(values, r2d, r1d, qerr)


# ---------------------------------------------------------------------------
# initial-data norms (one dimension)

@dataclass
class InitialDataNorms:
    l2: float
    chemin_lerner: float
    s: float
    moment_bounds: dict = field(default_factory=dict)

    def as_tuple(self):
        return self.l2, self.chemin_lerner


def _seed_window(seed):
    """Integration boxes (k range, η range) covering every component and its mirror."""
    boxes = []
    for c in seed.components:
        if len(c.k_center) != 1:
            raise UnsupportedError("initial-data norms are implemented for one dimension")
        if c.k_width <= 0:
            raise UnsupportedError("initial-data norms need seeds that are smooth in k (k_width > 0)")
        kc, ec = c.k_center[0], c.eta_center[0]
        kr = 9.0 * c.k_width
        er = (9.0 if c.shape == "gaussian" else 40.0) * c.eta_width
        for sgn in (1, -1):
            boxes.append((sgn * kc - kr, sgn * kc + kr, sgn * ec - er, sgn * ec + er))
    return boxes


def _seed_values(seed, k, eta):
    return seed(np.asarray(k)[..., None], np.asarray(eta)[..., None])


def _wedge_rule(a, b, n_panels, order):
    """Panels on [a, b] with 0 as an extra edge, so the wedge kη ≥ 0 is integrated piecewise smoothly."""
    edges = np.linspace(a, b, n_panels + 1)
    if a < 0 < b:
        edges = np.unique(np.concatenate((edges, [0.0])))
    return gq.panels(edges, order)


def initial_data_norms(seed, s: float, *, n_panels: int = 24, order: int = 16, moments: bool = True,
                       surplus: float = 0.01) -> InitialDataNorms:
    """‖A_s ρ₀‖_{L²_tL²_k} and ‖A_s ρ₀‖_{L^∞_kL²_t} for ρ₀(t,k) = ĥ_in(k,kt), d = 1.

    With η = kt, |k| dt = dη on the half-line sgn(η) = sgn(k), so

        ‖A_s ρ₀‖²_{L²L²} = ∫∫_{kη≥0} ⟨k,η⟩^{2s} |ĥ_in(k,η)|² dη dk,

    and the Chemin–Lerner norm takes the η-integral first and the sup over k last.
    """
    if not s > 4:
        raise HypothesisError(f"initial-data norms need s > 4, got s={s}")
    if not seed.components:
        return InitialDataNorms(0.0, 0.0, s, {})
    boxes = _seed_window(seed)
    total = _union_integral(seed, s, boxes, n_panels, order)
    l2 = math.sqrt(total)
    cl = math.sqrt(_chemin_lerner_sq(seed, s, boxes, n_panels, order))
    bounds = _moment_bounds(seed, s, surplus) if moments else {}
    return InitialDataNorms(l2, cl, s, bounds)


def _union_integral(seed, s, boxes, n_panels, order):
    ka = min(b[0] for b in boxes)
    kb = max(b[1] for b in boxes)
    ea = min(b[2] for b in boxes)
    eb = max(b[3] for b in boxes)
    scale = max(len(boxes) // 2, 1)
    kn, kw = _wedge_rule(ka, kb, n_panels * scale, order)
    en, ew = _wedge_rule(ea, eb, n_panels * scale, order)
    K, E = np.meshgrid(kn, en, indexing="ij")
    f = (1 + K * K + E * E) ** s * np.abs(_seed_values(seed, K, E)) ** 2 * (K * E >= 0)
    return float(kw @ f @ ew)


def _eta_line(seed, s, k, boxes, n_panels, order):
    """∫_{kη≥0} ⟨k,η⟩^{2s}|ĥ(k,η)|² dη at one k."""
    if k == 0:
        return 0.0
    ea = min(b[2] for b in boxes)
    eb = max(b[3] for b in boxes)
    lo, hi = (max(ea, 0.0), eb) if k > 0 else (ea, min(eb, 0.0))
    if hi <= lo:
        return 0.0
    en, ew = gq.uniform_panels(lo, hi, n_panels * max(len(boxes) // 2, 1), order)
    f = (1 + k * k + en * en) ** s * np.abs(_seed_values(seed, np.full_like(en, k), en)) ** 2
    return float(f @ ew)


def _chemin_lerner_sq(seed, s, boxes, n_panels, order):
    ka = min(b[0] for b in boxes)
    kb = max(b[1] for b in boxes)
    grid = np.linspace(ka, kb, 801)
    vals = np.array([_eta_line(seed, s, k, boxes, n_panels, order) for k in grid])
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = optimize.minimize_scalar(lambda k: -_eta_line(seed, s, k, boxes, n_panels, order),
                                   bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    return max(float(vals[i]), float(-res.fun))


def initial_data_norms_oracle(seed, s: float, *, refine: int = 4, n_panels: int = 24, order: int = 16):
    """Same norms integrated directly in (t, k) with `refine`× more panels on each axis."""
    if not s > 4:
        raise HypothesisError(f"initial-data norms need s > 4, got s={s}")
    if not seed.components:
        return 0.0, 0.0
    boxes = _seed_window(seed)
    ka = min(b[0] for b in boxes)
    kb = max(b[1] for b in boxes)
    emax = max(max(abs(b[2]), abs(b[3])) for b in boxes)
    edges = np.linspace(ka, kb, refine * n_panels + 1)
    if ka < 0 < kb:
        edges = np.unique(np.concatenate((edges, [0.0])))
    kn, kw = gq.panels(edges, order)
    tn, tw = gq.uniform_panels(0.0, 1.0, refine * n_panels, order)
    per_k = np.empty(kn.size)
    for i, k in enumerate(kn):
        T = emax / abs(k)
        t = T * tn
        f = abs(k) * (1 + k * k + (k * t) ** 2) ** s * np.abs(_seed_values(seed, np.full_like(t, k), k * t)) ** 2
        per_k[i] = T * float(f @ tw)
    l2 = math.sqrt(float(per_k @ kw))
    fine = np.linspace(ka, kb, 4 * 801)
    best = 0.0
    t_nodes, t_w = gq.uniform_panels(0.0, 1.0, refine * n_panels, order)
    def line(k):
        if k == 0:
            return 0.0
        T = emax / abs(k)
        t = T * t_nodes
        f = abs(k) * (1 + k * k + (k * t) ** 2) ** s * np.abs(_seed_values(seed, np.full_like(t, k), k * t)) ** 2
        return T * float(f @ t_w)
    vals = np.array([line(k) for k in fine])
    i = int(np.argmax(vals))
    res = optimize.minimize_scalar(lambda k: -line(k), bounds=(fine[max(i - 1, 0)], fine[min(i + 1, fine.size - 1)]),
                                   method="bounded", options={"xatol": 1e-10})
    best = max(float(vals[i]), float(-res.fun))
    return l2, math.sqrt(best)


def _moment_bounds(seed, s, surplus, n=256):
    """Σ_{|α|≤2} ‖z^α h_in‖_{H^{s+2+}_M} and the H^{s+1+}_M version on a physical grid, M = 2."""
    boxes = _seed_window(seed)
    kext = max(max(abs(b[0]), abs(b[1])) for b in boxes)
    eext = max(max(abs(b[2]), abs(b[3])) for b in boxes)
    # sample ĥ on a symmetric lattice and invert to h(z,v) on the dual grid
    dk = 2 * kext / n
    de = 2 * eext / n
    kk = dk * (np.arange(n) - n // 2)
    ee = de * (np.arange(n) - n // 2)
    K, E = np.meshgrid(kk, ee, indexing="ij")
    H = _seed_values(seed, K, E)
    h = np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(H))) * (n * dk) * (n * de)
    z = 2 * math.pi * np.fft.fftshift(np.fft.fftfreq(n, dk))
    v = 2 * math.pi * np.fft.fftshift(np.fft.fftfreq(n, de))
    out = {}
    for label, sig in (("H^{s+2+}", s + 2 + surplus), ("H^{s+1+}", s + 1 + surplus)):
        total = 0.0
        for a in range(3):
            total += weighted_sobolev_norm(h * (z[:, None] ** a), [z, v], sig, 2, moment_axes=[1])
        out[label] = total
    return out


# ---------------------------------------------------------------------------
# decay

@dataclass
class DecayFit:
    model: str
    rate: float
    residual: float
    prefactor: float
    n_points: int
    against: str = "t"

    @property
    def empty(self) -> bool:
        return self.n_points == 0


def decay_fit(series, model: str = "power", *, times=None, against: str = "t") -> DecayFit:
    """Least-squares fit of log y: power (slope against log x) or exponential (slope against t).

    `series` is either the values (with `times`) or a pair (times, values).
    Power fits use x = t, or x = ⟨t⟩ when against = "bracket".
    """
    if times is None:
        times, values = series
    else:
        values = series
    t = np.asarray(times, dtype=float)
    y = np.abs(np.asarray(values, dtype=float if np.isrealobj(values) else complex))
    if model not in ("power", "exponential"):
        raise ValidationError("model must be power or exponential")
    keep = y > 0
    if model == "power":
        x = np.sqrt(1 + t * t) if against == "bracket" else t
        keep &= x > 0
        X = np.log(x[keep])
    else:
        X = t[keep]
    if keep.sum() == 0:
        return DecayFit(model, math.nan, math.nan, math.nan, 0, against)
    Y = np.log(y[keep])
    if keep.sum() == 1:
        return DecayFit(model, math.nan, 0.0, float(y[keep][0]), 1, against)
    slope, icpt = np.polyfit(X, Y, 1)
    resid = float(np.sqrt(np.mean((Y - (slope * X + icpt)) ** 2)))
    return DecayFit(model, float(slope), resid, float(math.exp(icpt)), int(keep.sum()), against)


def envelope_constant(times, values, kmag, spec: WeightSpec) -> float:
    """Least C with |ρ̂(t,k)| ≤ C/w(t,k), w = ⟨k,kt⟩^s (sobolev) or e^{λ⟨k,kt⟩} (analytic)."""
    t = np.asarray(times, dtype=float)
    br = joint_bracket(kmag, kmag * t)
    w = br ** spec.s if spec.kind == "sobolev" else np.exp(spec.lam * br)
    return float(np.max(np.abs(values) * w)) if t.size else 0.0


def dispersive_integral(history, alpha: float, gamma: float, dk: float, dimension: int = 1):
    """∫ |k|^α ⟨k,kt⟩^γ |ρ̂(t,k)| dk at every recorded time (lattice sum)."""
    times = np.asarray(history.times, dtype=float)
    kmag = np.sqrt(np.sum(np.asarray(history.kgrid) ** 2, axis=-1)).ravel()
    rho = np.abs(np.asarray(history.rho_hat).reshape(len(times), -1))
    w = np.where(kmag > 0, kmag ** alpha, 0.0)[None, :] * joint_bracket(kmag[None, :], kmag[None, :] * times[:, None]) ** gamma
    return times, np.sum(w * rho, axis=1) * dk ** dimension


def dispersive_decay_check(history, alpha: float, gamma: float, sigma1: float, *, dk: float,
                           dimension: int = 1, min_points: int = 8) -> DecayFit:
    """Exponent of a log-log fit of the dispersive integral against ⟨t⟩ over the second half of the run."""
    if not alpha < sigma1 - gamma - dimension:
        raise HypothesisError(f"need alpha < sigma1 - gamma - d = {sigma1 - gamma - dimension:g}")
    times, vals = dispersive_integral(history, alpha, gamma, dk, dimension)
    if times.size == 0 or not np.any(vals > 0):
        return DecayFit("power", math.nan, math.nan, math.nan, 0, "bracket")
    half = times >= times[-1] / 2
    usable = half & (vals > 0)
    if usable.sum() < min_points:
        raise InsufficientDataError(f"only {int(usable.sum())} usable times in the second half; need {min_points}")
    return decay_fit((times[usable], vals[usable]), "power", against="bracket")
