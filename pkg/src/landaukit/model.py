"""Equilibria, interaction potentials and the weighted Sobolev norm.

Fourier convention: f̂(η) = (2π)^{-d} ∫ e^{-iv·η} f(v) dv.  Every module that
touches a transform inherits this single prefactor.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, interpolate, special

from .errors import (
    OutOfRangeError,
    UnsupportedError,
    ValidationError,
)

__all__ = [
    "RadialTable",
    "Equilibrium",
    "Potential",
    "fourier_equilibrium",
    "marginal",
    "potential_hat",
    "potential_l1_norm",
    "weighted_sobolev_norm",
    "equilibrium_sobolev_norm",
    "sphere_area",
    "load_radial_table",
    "joint_bracket",
]


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^n embedded in R^{n+1}."""
    if n < 0:
        return 0.0
    return 2.0 * math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2)


def _magnitude(x, d: int) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if d == 1 and (a.ndim == 0 or a.shape[-1] != 1):
        return np.abs(a)
    if a.shape[-1] != d:
        raise ValidationError(f"expected vectors with trailing dimension {d}, got shape {a.shape}")
    return np.sqrt(np.sum(a * a, axis=-1))


@dataclass(frozen=True)
class RadialTable:
    """Samples of a radial profile f(r) and f'(r) on a common grid starting at r=0."""

    radii: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    radial: bool = True

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        f = np.asarray(self.values, dtype=float)
        df = np.asarray(self.derivatives, dtype=float)
        if r.ndim != 1 or r.size < 4 or f.shape != r.shape or df.shape != r.shape:
            raise ValidationError("radial table needs matching 1-D arrays with at least 4 samples")
        if r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise ValidationError("radii must start at 0 and increase strictly")
        if np.any(f < 0):
            raise ValidationError("tabulated equilibrium must be nonnegative")
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "values", f)
        object.__setattr__(self, "derivatives", df)
        object.__setattr__(self, "_spline", interpolate.CubicHermiteSpline(r, f, df))

    @property
    def rmax(self) -> float:
        return float(self.radii[-1])

    @property
    def max_spacing(self) -> float:
        return float(np.max(np.diff(self.radii)))

    def __call__(self, r, nu: int = 0):
        r = np.abs(np.asarray(r, dtype=float))
        out = np.zeros_like(r)
        inside = r <= self.rmax
        out[inside] = self._spline(r[inside], nu)
        return out


def load_radial_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Read two-column (radius, value) text; lines starting with '#' are comments."""
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ValidationError(f"{path}: expected two columns (radius, value), found {data.shape[1]}")
    return data[:, 0], data[:, 1]


@dataclass(frozen=True)
class Equilibrium:
    kind: str
    dimension: int
    temperature: float = 1.0
    mass: float = 1.0
    table: RadialTable | None = None
    decay_exponent: float = math.inf

    def __post_init__(self):
        if self.kind not in ("maxwellian", "zero", "tabulated"):
            raise ValidationError(f"unknown equilibrium kind {self.kind!r}")
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValidationError("dimension must be a positive integer")
        if self.kind == "zero":
            object.__setattr__(self, "mass", 0.0)
        elif self.kind == "maxwellian":
            if not self.temperature > 0 or not self.mass > 0:
                raise ValidationError("maxwellian needs temperature > 0 and mass > 0")
        else:
            if self.table is None:
                raise ValidationError("tabulated equilibrium needs a table")
            if not self.mass > 0:
                raise ValidationError("tabulated equilibrium has zero mass")

    @classmethod
    def maxwellian(cls, dimension=3, temperature=1.0, mass=1.0):
        return cls("maxwellian", dimension, temperature, mass)

    @classmethod
    def zero(cls, dimension=3):
        return cls("zero", dimension, mass=0.0, decay_exponent=math.inf)

    @classmethod
    def from_table(cls, radii, values, derivatives=None, dimension=3, decay_exponent=0.0):
        """Build a radial equilibrium; without derivatives they come from a cubic spline."""
        radii = np.asarray(radii, dtype=float)
        values = np.asarray(values, dtype=float)
        if derivatives is None:
            derivatives = interpolate.CubicSpline(radii, values, bc_type=((1, 0.0), "not-a-knot"))(radii, 1)
        table = RadialTable(radii, values, derivatives)
        shell = sphere_area(dimension - 1)
        mass = shell * _spline_integral(table, lambda s: s ** (dimension - 1), 0.0, table.rmax)
        return cls("tabulated", dimension, temperature=float("nan"), mass=mass, table=table,
                   decay_exponent=decay_exponent)

    def radial(self, r):
        """f⁰ as a function of |v|."""
        r = np.abs(np.asarray(r, dtype=float))
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "maxwellian":
            th = self.temperature
            return self.mass * (2 * math.pi * th) ** (-self.dimension / 2) * np.exp(-r * r / (2 * th))
        return self.table(r)

    def radial_derivative(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "maxwellian":
            return -r / self.temperature * self.radial(r)
        return self.table(r, 1)

    def __call__(self, v):
        return self.radial(_magnitude(v, self.dimension))

    def velocity_extent(self) -> float:
        """Radius beyond which f⁰ is negligible (below ~1e-20 of its peak)."""
        if self.kind == "maxwellian":
            return math.sqrt(2 * self.temperature * 46.0)
        if self.kind == "tabulated":
            return self.table.rmax
        return 1.0


def _spline_integral(table: RadialTable, weight, a, b, nu=0):
    """∫_a^b f^{(nu)}(s) weight(s) ds, piecewise Gauss–Legendre on the table cells."""
    x, w = np.polynomial.legendre.leggauss(8)
    edges = table.radii[(table.radii > a) & (table.radii < b)]
    edges = np.concatenate(([a], edges, [b]))
    lo, hi = edges[:-1], edges[1:]
    s = 0.5 * (hi - lo)[:, None] * (x[None, :] + 1) + lo[:, None]
    vals = table(s.ravel(), nu).reshape(s.shape) * weight(s)
    return float(np.sum(0.5 * (hi - lo)[:, None] * w[None, :] * vals))


def fourier_equilibrium(eq: Equilibrium, eta) -> np.ndarray | float:
    """f̂⁰(η) with the (2π)^{-d} forward prefactor."""
    rho = _magnitude(eta, eq.dimension)
    out = fourier_equilibrium_radial(eq, rho)
    return float(out) if np.ndim(out) == 0 else out


def fourier_equilibrium_radial(eq: Equilibrium, rho) -> np.ndarray:
    rho = np.abs(np.asarray(rho, dtype=float))
    d = eq.dimension
    if eq.kind == "zero":
        return np.zeros_like(rho)
    if eq.kind == "maxwellian":
        return eq.mass * (2 * math.pi) ** (-d) * np.exp(-eq.temperature * rho * rho / 2)
    table = eq.table
    band = math.pi / table.max_spacing
    if np.any(rho > band):
        raise OutOfRangeError(
            f"|eta|={float(np.max(rho)):.6g} exceeds the resolvable band {band:.6g} of the tabulated profile"
        )
    flat = rho.ravel()
    out = np.empty_like(flat)
    nu = d / 2 - 1
    for i, p in enumerate(flat):
        if p == 0.0:
            out[i] = sphere_area(d - 1) * _spline_integral(table, lambda s: s ** (d - 1), 0.0, table.rmax)
        else:
            kern = lambda s, p=p: special.jv(nu, p * s) * s ** (d / 2)
            out[i] = (2 * math.pi) ** (d / 2) * p ** (-nu) * _spline_integral(table, kern, 0.0, table.rmax)
    return (2 * math.pi) ** (-d) * out.reshape(rho.shape)


def marginal(eq: Equilibrium, r):
    """Hyperplane marginal f⁰_k(r) = ∫_{v·k̂ = r} f⁰ and its derivative in r."""
    r_arr = np.asarray(r, dtype=float)
    if eq.kind == "zero":
        z = np.zeros_like(r_arr)
        return z, z.copy()
    if eq.kind == "maxwellian":
        th = eq.temperature
        val = eq.mass * (2 * math.pi * th) ** -0.5 * np.exp(-r_arr * r_arr / (2 * th))
        return val, -r_arr / th * val
    if not eq.table.radial:
        raise UnsupportedError("marginal requires a radially symmetric equilibrium")
    flat = r_arr.ravel()
    vals = np.empty_like(flat)
    ders = np.empty_like(flat)
    for i, x in enumerate(flat):
        vals[i], ders[i] = _table_marginal(eq, float(x))
    return vals.reshape(r_arr.shape), ders.reshape(r_arr.shape)


def _table_marginal(eq, r):
    table, d = eq.table, eq.dimension
    a = abs(r)
    if d == 1:
        return float(table(a)), float(np.sign(r) * table(a, 1))
    if a >= table.rmax:
        return 0.0, 0.0
    if d == 3:
        val = 2 * math.pi * _spline_integral(table, lambda s: s, a, table.rmax)
        return val, -2 * math.pi * r * float(table(a))
    shell = sphere_area(d - 2)
    pmax = math.sqrt(table.rmax ** 2 - a * a)
    knots = np.sqrt(np.clip(table.radii[table.radii > a] ** 2 - a * a, 0, None))
    pts = [p for p in knots if 0 < p < pmax][:50]
    fv = lambda p: float(table(math.hypot(a, p))) * p ** (d - 2)
    fd = lambda p: float(table(math.hypot(a, p), 1)) * (r / max(math.hypot(a, p), 1e-300)) * p ** (d - 2)
    val = integrate.quad(fv, 0, pmax, points=pts or None, limit=400, epsabs=0, epsrel=1e-12)[0]
    der = integrate.quad(fd, 0, pmax, points=pts or None, limit=400, epsabs=0, epsrel=1e-12)[0]
    return shell * val, shell * der


@dataclass(frozen=True)
class Potential:
    kind: str
    alpha: float = 1.0
    scale: float = 1.0
    table_k: tuple = ()
    table_w: tuple = ()
    l1_norm: float | None = None
    probe_k: np.ndarray = field(default_factory=lambda: np.concatenate(([0.0], np.logspace(-3, 3, 241))),
                                repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("screened_coulomb", "zero", "tabulated"):
            raise ValidationError(f"unknown potential kind {self.kind!r}")
        if self.kind == "screened_coulomb" and not self.alpha > 0:
            raise ValidationError("screened_coulomb needs alpha > 0")
        if self.kind == "tabulated":
            k = np.asarray(self.table_k, dtype=float)
            w = np.asarray(self.table_w, dtype=float)
            if k.ndim != 1 or k.shape != w.shape or k.size < 4 or k[0] != 0 or np.any(np.diff(k) <= 0):
                raise ValidationError("tabulated potential needs increasing |k| samples starting at 0")
            object.__setattr__(self, "_spline", interpolate.CubicSpline(k, w, bc_type=((1, 0.0), "not-a-knot")))

    @classmethod
    def screened(cls, alpha=1.0, scale=1.0):
        return cls("screened_coulomb", alpha=alpha, scale=scale)

    @classmethod
    def zero(cls):
        return cls("zero")

    def hat(self, kmag):
        kmag = np.abs(np.asarray(kmag, dtype=float))
        if self.kind == "zero":
            return np.zeros_like(kmag)
        if self.kind == "screened_coulomb":
            return self.scale / (self.alpha + kmag * kmag)
        kmax = float(self.table_k[-1])
        if np.any(kmag > kmax):
            raise OutOfRangeError(f"|k| beyond tabulated potential range {kmax}")
        return self.scale * self._spline(kmag)

    @property
    def admissibility_constant(self) -> float:
        k = self.probe_k
        if self.kind == "tabulated":
            k = k[k <= self.table_k[-1]]
        return float(np.max(np.abs(self.hat(k)) * (1 + k * k)))

    @property
    def nonneg_flag(self) -> bool:
        k = self.probe_k
        if self.kind == "tabulated":
            k = k[k <= self.table_k[-1]]
        return bool(np.all(self.hat(k) >= 0))


def potential_hat(pot: Potential, k) -> np.ndarray | float:
    a = np.asarray(k, dtype=float)
    kmag = np.abs(a) if a.ndim <= 1 and (a.ndim == 0 or a.size == 1) else np.sqrt(np.sum(a * a, axis=-1))
    out = pot.hat(kmag)
    return float(out) if np.ndim(out) == 0 else out


def potential_l1_norm(pot: Potential, dimension: int = 3) -> float:
    """‖W‖_{L¹} by radial quadrature of the physical-space kernel."""
    if pot.kind == "zero":
        return 0.0
    if pot.l1_norm is not None:
        return float(pot.l1_norm)
    if pot.kind == "tabulated":
        raise ValidationError("tabulated potentials must declare l1_norm")
    mu = math.sqrt(pot.alpha)
    if dimension == 3:
        kern = lambda r: math.exp(-mu * r) / (4 * math.pi * r) * 4 * math.pi * r * r
    elif dimension == 2:
        kern = lambda r: special.k0(mu * r) / (2 * math.pi) * 2 * math.pi * r
    elif dimension == 1:
        kern = lambda r: 2 * math.exp(-mu * r) / (2 * mu)
    else:
        raise UnsupportedError("screened kernel implemented for d <= 3")
    val = integrate.quad(kern, 0, math.inf, epsabs=0, epsrel=1e-13, limit=200)[0]
    return pot.scale * val


def _check_uniform(grid) -> float:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 2:
        raise UnsupportedError("each grid axis needs at least two points")
    dg = np.diff(g)
    if np.any(dg <= 0) or not np.allclose(dg, dg[0], rtol=1e-9, atol=0):
        raise UnsupportedError("weighted_sobolev_norm needs a uniform grid")
    return float(dg[0])


def weighted_sobolev_norm(samples, grids, sigma: float, M: int, moment_axes=None) -> float:
    """Discrete Σ_{|α|≤M} ‖⟨∇⟩^σ (v^α h)‖_{L²} on a uniform periodic grid.

    `grids` lists one coordinate array per axis.  Moments act on `moment_axes`;
    by default that is every axis for a pure velocity function and the second
    half of the axes for a phase-space function.
    """
    h = np.asarray(samples)
    grids = [np.asarray(g, dtype=float) for g in grids]
    if h.ndim != len(grids) or any(h.shape[i] != grids[i].size for i in range(h.ndim)):
        raise ValidationError("samples shape does not match the grids")
    if sigma < 0 or M < 0 or int(M) != M:
        raise ValidationError("need sigma >= 0 and integer M >= 0")
    steps = [_check_uniform(g) for g in grids]
    if moment_axes is None:
        moment_axes = list(range(h.ndim)) if h.ndim == 1 else list(range(h.ndim // 2, h.ndim))
    xi2 = np.zeros(h.shape)
    for ax, (n, dx) in enumerate(zip(h.shape, steps)):
        shape = [1] * h.ndim
        shape[ax] = n
        xi2 = xi2 + ((2 * np.pi * np.fft.fftfreq(n, dx)) ** 2).reshape(shape)
    mult = (1.0 + xi2) ** sigma
    dvol = float(np.prod(steps))
    total = 0.0
    for alpha in itertools.product(range(int(M) + 1), repeat=len(moment_axes)):
        if sum(alpha) > M:
            continue
        u = h
        for ax, p in zip(moment_axes, alpha):
            if p:
                shape = [1] * h.ndim
                shape[ax] = h.shape[ax]
                u = u * grids[ax].reshape(shape) ** p
        U = np.fft.fftn(u)
        total += math.sqrt(dvol / h.size * float(np.sum(mult * (U.real ** 2 + U.imag ** 2))))
    return total


def equilibrium_sobolev_norm(eq: Equilibrium, sigma: float, M: int = 2, n: int = 64, extent=None) -> float:
    """‖f⁰‖_{H^σ_M} sampled on an n^d grid over [-extent, extent)^d."""
    if eq.kind == "zero":
        return 0.0
    d = eq.dimension
    L = extent if extent is not None else max(10.0, eq.velocity_extent() * 1.05)
    axis = -L + 2 * L * np.arange(n) / n
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    r = np.sqrt(sum(m * m for m in mesh))
    return weighted_sobolev_norm(eq.radial(r), [axis] * d, sigma, M, moment_axes=list(range(d)))


def joint_bracket(*magnitudes):
    """⟨a, b, ...⟩ = (1 + a² + b² + ...)^{1/2}, elementwise in the magnitudes."""
    total = 1.0
    for m in magnitudes:
        m = np.asarray(m, dtype=float)
        total = total + m * m
    return np.sqrt(total)
