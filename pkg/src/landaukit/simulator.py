"""Pseudo-spectral integration of the Vlasov system in gliding coordinates.

With z = x − tv and g(t,z,v) = h(t,z+tv,v), free transport is the identity and

    ∂_t g + F(t,z+vt)·(∇_v − t∇_z) g + F(t,z+vt)·∇_v f⁰ = 0,   F̂ = −ik Ŵ ρ̂,   ρ̂(t,k) = ĝ(t,k,kt).

The state is ĝ on the (k, η) lattice of a periodic box in z and a truncated
velocity interval, normalized as a Riemann sum of (2π)^{−d}∫∫ g e^{−i(kz+ηv)}.
The forcing term from f⁰ is applied in Fourier variables; the quadratic term
is evaluated in conservative form as −i(η−tk)·FT[F(t,z+vt) g] from a
collocation product, with the 2/3 rule in both variables.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import fft as sfft
from scipy.interpolate import CubicSpline

from .errors import DivergenceError, HorizonWarning, InconclusiveHorizonError, StepError, ValidationError
from .model import Equilibrium, Potential, fourier_equilibrium_radial

__all__ = [
    "SeedComponent",
    "SeedSpec",
    "SimConfig",
    "DistributionState",
    "DensityHistory",
    "ScatteringState",
    "Simulator",
    "initial_state",
    "step",
    "extract_density",
    "force_field",
    "run",
    "scattering_state",
    "write_snapshot",
    "read_snapshot",
    "two_mode_echo_seed",
    "secondary_peak",
]

RK4_LIMIT = 2.8
MODES = ("nonlinear", "linearized", "free")
SNAPSHOT_MAGIC = b"GLDS"
SNAPSHOT_VERSION = 1


# ---------------------------------------------------------------------------
# seeds

@dataclass(frozen=True)
class SeedComponent:
    """a · exp(−|k−k_c|²/2w_k²) · shape((η−η_c)/w_η) · e^{iφ}, mirrored to keep h_in real.

    k_width = 0 selects the single lattice mode nearest to k_center.
    """

    amplitude: float
    k_center: tuple
    eta_center: tuple
    eta_width: float = 1.0
    k_width: float = 0.0
    shape: str = "gaussian"
    phase: float = 0.0

    def __post_init__(self):
        if self.shape not in ("gaussian", "sech"):
            raise ValidationError(f"seed shape must be gaussian or sech, got {self.shape!r}")
        if not self.eta_width > 0 or self.k_width < 0:
            raise ValidationError("seed widths must be positive")

    def profile(self, k, eta, dk=None):
        """Unmirrored component on arrays k (..., d) and eta (..., d)."""
        kc = np.asarray(self.k_center, dtype=float)
        ec = np.asarray(self.eta_center, dtype=float)
        x = (eta - ec) / self.eta_width
        if self.shape == "gaussian":
            s = np.exp(-0.5 * np.sum(x * x, axis=-1))
        else:
            s = np.prod(1.0 / np.cosh(x), axis=-1)
        if self.k_width > 0:
            kf = np.exp(-0.5 * np.sum((k - kc) ** 2, axis=-1) / self.k_width ** 2)
        else:
            tol = 0.5 * (dk if dk is not None else 1e-9)
            kf = np.all(np.abs(k - kc) < tol, axis=-1).astype(float)
        return self.amplitude * np.exp(1j * self.phase) * kf * s


@dataclass(frozen=True)
class SeedSpec:
    components: tuple = ()

    def __call__(self, k, eta, dk=None):
        """ĥ_in(k, η) without the ε factor; k = 0 removed, conjugate mirror added."""
        k = np.asarray(k, dtype=float)
        eta = np.asarray(eta, dtype=float)
        out = np.zeros(np.broadcast_shapes(k.shape[:-1], eta.shape[:-1]), dtype=complex)
        for c in self.components:
            out = out + c.profile(k, eta, dk) + np.conj(c.profile(-k, -eta, dk))
        zero_k = np.all(k == 0, axis=-1)
        return np.where(zero_k, 0.0, out)

    @classmethod
    def gaussian(cls, k_center, eta_center=None, amplitude=1.0, eta_width=1.0, k_width=0.0):
        k_center = tuple(np.atleast_1d(np.asarray(k_center, dtype=float)))
        if eta_center is None:
            eta_center = (0.0,) * len(k_center)
        return cls((SeedComponent(amplitude, k_center, tuple(np.atleast_1d(eta_center)), eta_width, k_width),))


def two_mode_echo_seed(k0: float, tau: float, *, amplitude=1.0, eta_width=1.0, shape="gaussian") -> SeedSpec:
    """Mode k₀ unmixed at t = 0 plus mode 2k₀ whose density peaks at t = τ."""
    return SeedSpec((
        SeedComponent(amplitude, (k0,), (0.0,), eta_width, 0.0, shape),
        SeedComponent(amplitude, (2 * k0,), (2 * k0 * tau,), eta_width, 0.0, shape),
    ))


# ---------------------------------------------------------------------------
# configuration and state

@dataclass(frozen=True)
class SimConfig:
    dimension: int = 1
    L_box: float = 4 * math.pi
    N_z: int = 64
    N_v: int = 256
    v_max: float = 10.0
    dt: float = 0.05
    T_end: float = 40.0
    epsilon: float = 1e-3
    mode: str = "nonlinear"
    potential: Potential = field(default_factory=Potential.screened)
    equilibrium: Equilibrium | None = None
    seed: SeedSpec = field(default_factory=lambda: SeedSpec.gaussian((0.5,)))
    record_every: int = 1
    keep_states_every: int = 0
    dealias: float = 2.0 / 3.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.dimension < 1 or self.dimension > 3:
            raise ValidationError("dimension must be 1, 2 or 3")
        if self.mode == "nonlinear" and self.dimension > 1 and self.N_z ** self.dimension * self.N_v ** self.dimension > 2 ** 24:
            raise ValidationError("nonlinear grid too large for a desk-scale run")
        for name in ("N_z", "N_v"):
            n = getattr(self, name)
            if n < 4 or n % 2:
                raise ValidationError(f"{name} must be an even integer >= 4")
        if not (self.L_box > 0 and self.v_max > 0 and self.dt > 0 and self.T_end >= 0):
            raise ValidationError("L_box, v_max, dt must be positive and T_end nonnegative")
        if self.record_every < 1:
            raise ValidationError("record_every must be >= 1")
        if self.equilibrium is None:
            object.__setattr__(self, "equilibrium", Equilibrium.maxwellian(self.dimension))
        if self.equilibrium.dimension != self.dimension:
            raise ValidationError("equilibrium dimension does not match the simulation")

    @property
    def dz(self) -> float:
        return self.L_box / self.N_z

    @property
    def dv(self) -> float:
        return 2 * self.v_max / self.N_v

    @property
    def k_max(self) -> float:
        return math.pi / self.dz

    @property
    def eta_max(self) -> float:
        return math.pi / self.dv

    @property
    def cfl(self) -> float:
        """dt · (largest |k| the force acts on) · v_max."""
        return self.dt * self.dealias * self.k_max * math.sqrt(self.dimension) * self.v_max

    @property
    def n_steps(self) -> int:
        return int(round(self.T_end / self.dt))

    @property
    def shape(self) -> tuple:
        return (self.N_z,) * self.dimension + (self.N_v,) * self.dimension

    def metadata(self) -> dict:
        return {
            "dimension": self.dimension,
            "L_box": self.L_box,
            "N_z": self.N_z,
            "N_v": self.N_v,
            "v_max": self.v_max,
            "dt": self.dt,
            "T_end": self.T_end,
            "epsilon": self.epsilon,
            "mode": self.mode,
            "k_min": 2 * math.pi / self.L_box,
            "regime": "echo-demonstration" if self.mode == "nonlinear" and self.dimension < 3 else "standard",
            "domain": "periodic box surrogate for whole space; low-k behavior differs",
        }


@dataclass(frozen=True)
class DistributionState:
    t: float
    g_hat: np.ndarray

    def __post_init__(self):
        self.g_hat.setflags(write=False)

    @property
    def mass(self) -> complex:
        return complex(self.g_hat.flat[0])

    def reality_defect(self) -> float:
        """max |ĝ(−k,−η) − conj ĝ(k,η)| / max|ĝ| over pairs that exist on the lattice."""
        g = self.g_hat
        scale = float(np.max(np.abs(g)))
        if scale == 0:
            return 0.0
        flipped = g
        for ax in range(g.ndim):
            flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
        return float(np.max(np.abs(flipped - np.conj(g)))) / scale


@dataclass
class DensityHistory:
    """ρ̂ and F̂ at the recorded times for every lattice k (full FFT layout)."""

    times: list = field(default_factory=list)
    rho_hat: list = field(default_factory=list)
    force_hat: list = field(default_factory=list)
    out_of_band: list = field(default_factory=list)
    rhs_norm: list = field(default_factory=list)
    states: list = field(default_factory=list)
    kgrid: np.ndarray | None = None

    def as_arrays(self):
        return np.asarray(self.times), np.asarray(self.rho_hat), np.asarray(self.force_hat)

    def mode_index(self, m) -> tuple:
        """Array index of lattice mode m (integer tuple) in the FFT layout."""
        m = tuple(np.atleast_1d(m).astype(int))
        n = self.kgrid.shape[0]
        return tuple(int(x) % n for x in m)

    def series(self, m):
        idx = self.mode_index(m)
        return np.asarray(self.times), np.array([r[idx] for r in self.rho_hat])


# ---------------------------------------------------------------------------
# grid helpers

class _Grid:
    def __init__(self, cfg: SimConfig):
        d = cfg.dimension
        self.d = d
        self.cfg = cfg
        k1 = 2 * math.pi * sfft.fftfreq(cfg.N_z, cfg.dz)
        e1 = 2 * math.pi * sfft.fftfreq(cfg.N_v, cfg.dv)
        self.k1, self.e1 = k1, e1
        self.z0 = -cfg.L_box / 2
        self.v0 = -cfg.v_max
        self.v1 = self.v0 + cfg.dv * np.arange(cfg.N_v)
        zaxes = list(range(d))
        vaxes = list(range(d, 2 * d))
        self.zaxes, self.vaxes = zaxes, vaxes
        # k and η as (..., d) arrays broadcast against the full state
        kg = np.meshgrid(*([k1] * d), indexing="ij")
        self.k = np.stack(kg, axis=-1)  # (Nz,)*d + (d,)
        eg = np.meshgrid(*([e1] * d), indexing="ij")
        self.eta = np.stack(eg, axis=-1)  # (Nv,)*d + (d,)
        vg = np.meshgrid(*([self.v1] * d), indexing="ij")
        self.v = np.stack(vg, axis=-1)
        self.kmag = np.sqrt(np.sum(self.k ** 2, axis=-1))
        self.norm = (2 * math.pi) ** (-d) * (cfg.dz * cfg.dv) ** d
        kz = np.tensordot(self.k, np.full(d, self.z0), axes=([-1], [0]))
        ev = np.tensordot(self.eta, np.full(d, self.v0), axes=([-1], [0]))
        self.zphase = np.exp(-1j * kz)  # over k
        self.vphase = np.exp(-1j * ev)  # over η
        mz = np.abs(np.rint(self.k1 / (2 * math.pi / cfg.L_box)))
        mv = np.abs(np.rint(self.e1 / (2 * math.pi / (cfg.N_v * cfg.dv))))
        keep_z = mz <= cfg.dealias * cfg.N_z / 2
        keep_v = mv <= cfg.dealias * cfg.N_v / 2
        self.kmask = np.ones((cfg.N_z,) * d, dtype=bool)
        for ax in range(d):
            sl = [None] * d
            sl[ax] = slice(None)
            self.kmask = self.kmask & keep_z[tuple(sl)]
        self.kmask.flat[0] = False
        vmask = np.ones((cfg.N_v,) * d, dtype=bool)
        for ax in range(d):
            sl = [None] * d
            sl[ax] = slice(None)
            vmask = vmask & keep_v[tuple(sl)]
        self.vmask = vmask
        kkeep = self.kmask.copy()
        kkeep.flat[0] = True
        self.rhs_mask = kkeep.reshape(kkeep.shape + (1,) * d) & vmask.reshape((1,) * d + vmask.shape)
        self.band = cfg.dealias * cfg.eta_max
        self._fhat0 = self._equilibrium_transform(cfg.equilibrium)

    def _equilibrium_transform(self, eq):
        if eq.kind != "tabulated":
            return lambda r: fourier_equilibrium_radial(eq, r)
        band = math.pi / eq.table.max_spacing
        rr = np.linspace(0.0, band, 2049)
        spline = CubicSpline(rr, fourier_equilibrium_radial(eq, rr))
        return lambda r: np.where(r <= band, spline(np.minimum(r, band)), 0.0)

    def fhat0(self, r):
        return self._fhat0(r)

    def to_fourier(self, g):
        gh = sfft.fftn(g, axes=self.zaxes + self.vaxes)
        return self.norm * gh * self._phase()

    def to_physical(self, gh):
        return sfft.ifftn(gh / (self.norm * self._phase()), axes=self.zaxes + self.vaxes)

    def _phase(self):
        d = self.d
        return self.zphase.reshape(self.zphase.shape + (1,) * d) * self.vphase.reshape((1,) * d + self.vphase.shape)

    def velocity_profile(self, gh):
        """A(k,v) = (2π)^{−d} Δz^d Σ_z g e^{−ikz}, from ĝ by an inverse transform in η."""
        d = self.d
        cfg = self.cfg
        x = gh / self.vphase.reshape((1,) * d + self.vphase.shape)
        return sfft.ifftn(x, axes=self.vaxes) / cfg.dv ** d

    def density(self, gh, t):
        """ρ̂(k) = ĝ(k, kt) by band-limited evaluation in η; out-of-band modes are zeroed."""
        d = self.d
        A = self.velocity_profile(gh)
        kv = np.tensordot(self.k, self.v, axes=([-1], [-1]))  # (Nz..., Nv...)
        rho = self.cfg.dv ** d * np.sum(A * np.exp(-1j * t * kv), axis=tuple(self.vaxes))
        oob = self.kmag * abs(t) > self.band
        rho = np.where(oob, 0.0, rho)
        rho.flat[0] = 0.0
        return rho, oob


def initial_state(cfg: SimConfig, grid: _Grid | None = None) -> DistributionState:
    grid = grid or _Grid(cfg)
    d = cfg.dimension
    k = grid.k.reshape(grid.k.shape[:-1] + (1,) * d + (d,))
    eta = grid.eta.reshape((1,) * d + grid.eta.shape)
    dk = 2 * math.pi / cfg.L_box
    gh = cfg.epsilon * cfg.seed(k, eta, dk)
    if abs(gh.flat[0]) != 0:
        raise ValidationError("seed must be mean-zero")
    return DistributionState(0.0, np.ascontiguousarray(gh))


def force_field(density, pot: Potential, kgrid):
    """F̂(k) = −ik Ŵ(k) ρ̂(k) as an array with a trailing component axis."""
    kgrid = np.asarray(kgrid, dtype=float)
    density = np.asarray(density, dtype=complex)
    kmag = np.sqrt(np.sum(kgrid ** 2, axis=-1))
    what = np.where(kmag > 0, pot.hat(np.where(kmag > 0, kmag, 1.0)), 0.0)
    return -1j * kgrid * (what * density)[..., None]


class Simulator:
    """Holds the grid, equilibrium tables and the right-hand side for one configuration."""

    def __init__(self, cfg: SimConfig):
        if cfg.mode != "free" and cfg.cfl > RK4_LIMIT:
            raise StepError(f"dt·k_max·v_max = {cfg.cfl:.3g} exceeds the RK4 limit {RK4_LIMIT}")
        self.cfg = cfg
        self.grid = _Grid(cfg)
        g = self.grid
        self.what = np.where(g.kmag > 0, cfg.potential.hat(np.where(g.kmag > 0, g.kmag, 1.0)), 0.0)

    def initial_state(self) -> DistributionState:
        return initial_state(self.cfg, self.grid)

    def density(self, state: DistributionState):
        return self.grid.density(state.g_hat, state.t)

    def force(self, rho):
        F = force_field(rho, self.cfg.potential, self.grid.k)
        return np.where(self.grid.kmask[..., None], F, 0.0)

    def rhs(self, t, gh):
        g = self.grid
        d = g.d
        rho, _ = g.density(gh, t)
        F = self.force(rho)
        k = g.k.reshape(g.k.shape[:-1] + (1,) * d + (d,))
        eta = g.eta.reshape((1,) * d + g.eta.shape)
        shifted = eta - t * k
        r = np.sqrt(np.sum(shifted ** 2, axis=-1))
        coupling = np.sum(k * shifted, axis=-1)
        lin = -(self.what * rho).reshape(rho.shape + (1,) * d) * coupling * g.fhat0(r)
        out = lin
        if self.cfg.mode == "nonlinear":
            out = out + self._quadratic(t, gh, F, shifted)
        return np.where(g.rhs_mask, out, 0.0)

    def _quadratic(self, t, gh, F, shifted):
        """−i(η−tk)·FT[F(t,z+vt) g] from a collocation product."""
        g = self.grid
        d = g.d
        cfg = self.cfg
        phys = g.to_physical(gh).real
        coef = (2 * math.pi) ** d / cfg.L_box ** d * F  # Fourier-series coefficients of F
        kv = np.tensordot(g.k, g.v, axes=([-1], [-1]))  # (Nz..., Nv...)
        shift = np.exp(1j * t * kv) / g.zphase.reshape(g.zphase.shape + (1,) * d)
        total = np.zeros_like(gh)
        for i in range(d):
            series = coef[..., i].reshape(coef.shape[:-1] + (1,) * d) * shift
            Fzv = (cfg.N_z ** d) * sfft.ifftn(series, axes=g.zaxes).real
            total = total - 1j * shifted[..., i] * g.to_fourier(Fzv * phys)
        return total

    def step(self, state: DistributionState) -> DistributionState:
        cfg = self.cfg
        t, y, h = state.t, state.g_hat, cfg.dt
        if cfg.mode == "free":
            return DistributionState(t + h, y)
        k1 = self.rhs(t, y)
        k2 = self.rhs(t + h / 2, y + h / 2 * k1)
        k3 = self.rhs(t + h / 2, y + h / 2 * k2)
        k4 = self.rhs(t + h, y + h * k3)
        new = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(new)):
            raise DivergenceError(f"non-finite state after step from t={t:g}", last_valid_time=t)
        return DistributionState(t + h, new)

    def record(self, hist: DensityHistory, state: DistributionState, rhs=None):
        rho, oob = self.density(state)
        hist.times.append(state.t)
        hist.rho_hat.append(rho)
        hist.force_hat.append(self.force(rho))
        hist.out_of_band.append(oob)
        if rhs is None:
            rhs = np.zeros(1) if self.cfg.mode == "free" else self.rhs(state.t, state.g_hat)
        hist.rhs_norm.append(self.l2(rhs))

    def l2(self, gh) -> float:
        """L²(dk dη) norm of a lattice field: box sum in k, Riemann sum in η."""
        cfg = self.cfg
        dk = 2 * math.pi / cfg.L_box
        deta = 2 * math.pi / (cfg.N_v * cfg.dv)
        return math.sqrt(float(np.sum(np.abs(gh) ** 2)) * (dk * deta) ** cfg.dimension)

    def run(self, state: DistributionState | None = None, *, n_steps: int | None = None,
            track=None) -> tuple[DistributionState, DensityHistory]:
        cfg = self.cfg
        state = state or self.initial_state()
        n_steps = cfg.n_steps if n_steps is None else n_steps
        hist = DensityHistory(kgrid=self.grid.k)
        self.record(hist, state)
        if cfg.keep_states_every:
            hist.states.append(state)
        for n in range(1, n_steps + 1):
            state = self.step(state)
            if n % cfg.record_every == 0 or n == n_steps:
                self.record(hist, state)
            if cfg.keep_states_every and (n % cfg.keep_states_every == 0 or n == n_steps):
                hist.states.append(state)
        _check_band(hist, self.grid, track)
        return state, hist


def _check_band(hist, grid, track):
    if track is None:
        tracked = grid.kmask
    else:
        tracked = np.zeros_like(grid.kmask)
        for m in track:
            tracked[hist.mode_index(m)] = True
    if not tracked.any():
        return
    frac = float(np.sum(hist.out_of_band[-1] & tracked)) / float(np.sum(tracked))
    if frac > 0.5:
        warnings.warn(
            f"{frac:.0%} of tracked modes left the resolved η band by t={hist.times[-1]:g}",
            HorizonWarning,
            stacklevel=3,
        )


def step(state: DistributionState, config: SimConfig) -> DistributionState:
    return Simulator(config).step(state)


def extract_density(state: DistributionState, config: SimConfig):
    """(ρ̂(t,k) over the k lattice, out-of-band flags)."""
    return _Grid(config).density(state.g_hat, state.t)


def run(config: SimConfig, *, track=None):
    return Simulator(config).run(track=track)


# ---------------------------------------------------------------------------
# scattering state

@dataclass
class ScatteringState:
    h_inf: np.ndarray
    tail_bound: float
    decay_exponent: float
    times: np.ndarray
    distance: np.ndarray

    @property
    def decreasing_last_quarter(self) -> bool:
        n = len(self.times)
        tail = self.distance[int(0.75 * (n - 1)):]
        return bool(np.all(np.diff(tail) <= 1e-14 * max(1.0, float(np.max(self.distance)))))


def _power_fit(t, y):
    keep = (t > 0) & (y > 0)
    if keep.sum() < 2:
        return math.inf, 0.0
    slope, icpt = np.polyfit(np.log(t[keep]), np.log(y[keep]), 1)
    return -slope, math.exp(icpt)


def scattering_state(history: DensityHistory, final_state: DistributionState, config: SimConfig) -> ScatteringState:
    """ĥ∞ ≈ ĝ(T_end), with the remaining ∫_{T_end}^∞ ‖∂_t ĝ‖ bounded from a power fit of the recorded rates."""
    times = np.asarray(history.times, dtype=float)
    rates = np.asarray(history.rhs_norm, dtype=float)
    if times.size == 0 or abs(times[-1] - final_state.t) > 1e-9 * max(1.0, final_state.t):
        raise ValidationError("history does not end at the final state")
    h_inf = np.array(final_state.g_hat)
    T = times[-1]
    if not np.any(rates > 0):
        q, tail = math.inf, 0.0
    else:
        half = times >= T / 2
        q, C = _power_fit(times[half], rates[half])
        floor = 1e-13 * float(np.max(rates))
        if np.all(rates[half] <= floor):
            q, tail = math.inf, 0.0
        elif q <= 1.0:
            raise InconclusiveHorizonError(
                f"right-hand side decays like t^-{q:.3g} near T_end={T:g}; its time integral may not converge"
            )
        else:
            tail = C * T ** (1 - q) / (q - 1)
    # distance bound D(t) = ∫_t^T ‖∂_t ĝ‖ + tail
    seg = 0.5 * (rates[1:] + rates[:-1]) * np.diff(times)
    remaining = np.concatenate((np.cumsum(seg[::-1])[::-1], [0.0]))
    return ScatteringState(h_inf, float(tail), float(q), times, remaining + tail)


# ---------------------------------------------------------------------------
# snapshots

_HEADER = struct.Struct("<4sIIIIddd")


def write_snapshot(path, state: DistributionState, config: SimConfig):
    """Little-endian header (magic, version, d, N_z, N_v, L_box, v_max, t) then complex128 ĝ in C order."""
    import os
    import tempfile

    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, config.dimension, config.N_z, config.N_v,
                          config.L_box, config.v_max, state.t)
    data = np.ascontiguousarray(state.g_hat, dtype="<c16").tobytes()
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".snap")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_snapshot(path):
    """Returns (state, header dict)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValidationError("snapshot too short")
    magic, version, d, nz, nv, L, vmax, t = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC or version != SNAPSHOT_VERSION:
        raise ValidationError("not a snapshot file or unsupported version")
    shape = (nz,) * d + (nv,) * d
    count = int(np.prod(shape))
    body = raw[_HEADER.size:]
    if len(body) != 16 * count:
        raise ValidationError("snapshot payload size does not match its header")
    gh = np.frombuffer(body, dtype="<c16").reshape(shape).astype(complex)
    meta = {"dimension": d, "N_z": nz, "N_v": nv, "L_box": L, "v_max": vmax, "t": t}
    return DistributionState(t, gh), meta


# ---------------------------------------------------------------------------
# echo read-out

def secondary_peak(times, values):
    """Time of the largest local maximum of |values| after the first local minimum; None if absent."""
    a = np.abs(np.asarray(values))
    times = np.asarray(times)
    interior = np.arange(1, a.size - 1)
    minima = interior[(a[interior] <= a[interior - 1]) & (a[interior] < a[interior + 1])]
    if minima.size == 0:
        return None
    start = int(minima[0])
    maxima = interior[(interior > start) & (a[interior] >= a[interior - 1]) & (a[interior] > a[interior + 1])]
    if maxima.size == 0:
        return None
    best = maxima[np.argmax(a[maxima])]
    return float(times[best])
