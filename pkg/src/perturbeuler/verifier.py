"""Finite-difference residuals of the 1-D Euler / Navier-Stokes equations.

Exact fields are sampled on a uniform space-time lattice and pushed through
second-order central differences; the residuals must vanish like h**2 until
the accuracy of the integrated ODE state takes over.
"""

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import integrate as spi

from .errors import (
    BlowupInsideRange,
    GridOutsideSupport,
    QuadratureFailure,
    UnboundedSupport,
    VacuumOnGrid,
)
from .ode_core import DEFAULT_ATOL, DEFAULT_RTOL, ModelParams, SeedData, Trajectory, integrate
from .solution_field import SupportKind, eval_density, support

RHO_FLOOR = 1e-10


class BoundaryKinkWarning(UserWarning):
    """The lattice touches the vacuum boundary, where rho**(gamma-1) has a kink."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform lattice: nt intervals on ``t_range``, nx intervals on ``window``.

    ``window=None`` picks the support shrunk by ``margin`` on both sides,
    intersected over all time nodes. ``margin=0`` disables the support check
    and lets the lattice run across the free boundary.
    """

    t_range: Tuple[float, float]
    nt: int
    nx: int
    window: Optional[Tuple[float, float]] = None
    margin: float = 0.05

    def __post_init__(self):
        t_lo, t_hi = self.t_range
        if not t_hi > t_lo >= 0:
            raise ValueError(f"bad t_range {self.t_range}")
        if self.nt < 2 or self.nx < 2:
            raise ValueError("nt and nx must be at least 2")
        if not 0 <= self.margin < 0.5:
            raise ValueError(f"margin must lie in [0, 0.5), got {self.margin}")
        if self.window is not None and not self.window[1] > self.window[0]:
            raise ValueError(f"bad window {self.window}")

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.t_range, self.nt * factor, self.nx * factor, self.window, self.margin)


@dataclass
class Norms:
    max: float
    l2: float


@dataclass
class ResidualField:
    values: np.ndarray
    norms: Norms


@dataclass
class GridSamples:
    grid: GridSpec
    window: Tuple[float, float]
    t: np.ndarray
    x: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    q: np.ndarray
    params: ModelParams
    kink: bool

    @property
    def k(self):
        return self.t[1] - self.t[0]

    @property
    def h(self):
        return self.x[1] - self.x[0]


@dataclass
class ResidualReport:
    grid: GridSpec
    window: Tuple[float, float]
    mass_residual: Norms
    momentum_residual: Norms
    nonconservative_momentum_residual: Optional[Norms]
    ns_residual: Optional[Norms]
    observed_order: Optional[float]
    ode_tolerance_floor: float
    levels: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    status: str = "ok"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = {"t_range": list(self.grid.t_range), "nt": self.grid.nt,
                     "nx": self.grid.nx, "window": list(self.window),
                     "margin": self.grid.margin}
        d.pop("window")
        return d


def _norms(r, k, h) -> Norms:
    return Norms(float(np.max(np.abs(r))), float(np.sqrt(np.sum(r * r) * k * h)))


def trajectory_for(grid: GridSpec, seed: SeedData, params: ModelParams, *,
                   rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, y_equation="ode28") -> Trajectory:
    traj = integrate(seed, params, grid.t_range[1], rtol, atol, y_equation=y_equation)
    if traj.blowup:
        raise BlowupInsideRange(
            f"a collapses at T={traj.blowup_time:.17g}, inside t_range {grid.t_range}")
    return traj


def _auto_window(states_t, traj, params, margin):
    lo, hi = -math.inf, math.inf
    for t in states_t:
        s = support(traj.state_at(t), params, traj.xi)
        if s.kind is not SupportKind.INTERVAL:
            raise GridOutsideSupport(
                f"support at t={t:.6g} is {s.kind.value}; an explicit window is required")
        w = s.width
        lo, hi = max(lo, s.x_left + margin * w), min(hi, s.x_right - margin * w)
    if not hi > lo:
        raise GridOutsideSupport("shrunk supports have empty intersection over t_range")
    return lo, hi


def sample_grid(grid: GridSpec, seed: SeedData, params: ModelParams, *,
                trajectory: Optional[Trajectory] = None, **integrate_kw) -> GridSamples:
    """Sample rho, u and q = rho**(gamma-1) (untruncated) on the lattice."""
    traj = trajectory or trajectory_for(grid, seed, params, **integrate_kw)
    if traj.t_max < grid.t_range[1]:
        raise BlowupInsideRange(f"trajectory covers only t <= {traj.t_max}")
    t = np.linspace(*grid.t_range, grid.nt + 1)
    if grid.window is None:
        if grid.margin == 0:
            raise GridOutsideSupport("margin=0 needs an explicit window")
        window = _auto_window(t, traj, params, grid.margin)
    else:
        window = tuple(grid.window)
    x = np.linspace(*window, grid.nx + 1)

    g, K, xi = params.gamma, params.K, seed.xi
    a, adot, b, w, y = traj.internal(t).T
    c = adot / a
    B = (g - 1.0) / (K * g) * w
    C = (g - 1.0) * xi / (2.0 * K * g * a ** (g + 1.0))
    q = y[:, None] - B[:, None] * x[None, :] - C[:, None] * x[None, :] ** 2
    u = c[:, None] * x[None, :] + b[:, None]
    rho = np.zeros_like(q)
    pos = q > 0
    rho[pos] = np.exp(np.log(q[pos]) / (g - 1.0))

    kink = False
    if grid.margin == 0:
        kink = bool(np.any(~pos))
    else:
        if not np.all(pos):
            raise GridOutsideSupport("lattice leaves the support of the density")
        if grid.window is not None:
            for ti in t:
                s = support(traj.state_at(ti), params, xi)
                if s.kind is SupportKind.INTERVAL:
                    m = grid.margin * s.width
                    if window[0] < s.x_left + m or window[1] > s.x_right - m:
                        raise GridOutsideSupport(
                            f"window {window} enters the vacuum margin at t={ti:.6g}")
    return GridSamples(grid, window, t, x, rho, u, q, params, kink)


def _dt(f, k):
    return (f[2:, 1:-1] - f[:-2, 1:-1]) / (2 * k)


def _dx(f, h):
    return (f[1:-1, 2:] - f[1:-1, :-2]) / (2 * h)


def _dxx(f, h):
    return (f[1:-1, 2:] - 2 * f[1:-1, 1:-1] + f[1:-1, :-2]) / (h * h)


def mass_residual(s: GridSamples) -> ResidualField:
    """rho_t + (rho u)_x at interior nodes."""
    r = _dt(s.rho, s.k) + _dx(s.rho * s.u, s.h)
    return ResidualField(r, _norms(r, s.k, s.h))


def momentum_residual(s: GridSamples, form: str = "conservative") -> ResidualField:
    """(rho u)_t + (rho u^2 + K rho^gamma)_x, or u_t + u u_x + K gamma/(gamma-1) (rho^(gamma-1))_x."""
    K, g = s.params.K, s.params.gamma
    if form == "conservative":
        m = s.rho * s.u
        r = _dt(m, s.k) + _dx(m * s.u + K * s.rho**g, s.h)
    elif form == "nonconservative":
        if np.any(s.rho < RHO_FLOOR):
            raise VacuumOnGrid("nonconservative form needs rho bounded away from zero")
        r = (_dt(s.u, s.k) + s.u[1:-1, 1:-1] * _dx(s.u, s.h)
             + K * g / (g - 1.0) * _dx(s.q, s.h))
    else:
        raise ValueError(f"unknown form {form!r}")
    return ResidualField(r, _norms(r, s.k, s.h))


def viscous_term(s: GridSamples, mu: float) -> np.ndarray:
    return mu * _dxx(s.u, s.h)


def navier_stokes_residual(s: GridSamples, mu: float) -> ResidualField:
    """Conservative momentum residual with the viscous stress mu u_xx moved to the left."""
    if not mu > 0:
        raise ValueError("Navier-Stokes residual needs mu > 0")
    r = momentum_residual(s).values - viscous_term(s, mu)
    return ResidualField(r, _norms(r, s.k, s.h))


# thin wrappers matching the per-equation entry points

def residual_mass(grid, seed, params, **kw) -> ResidualField:
    return mass_residual(sample_grid(grid, seed, params, **kw))


def residual_momentum(grid, seed, params, form="conservative", **kw) -> ResidualField:
    return momentum_residual(sample_grid(grid, seed, params, **kw), form)


def residual_navier_stokes(grid, seed, params, **kw) -> ResidualField:
    return navier_stokes_residual(sample_grid(grid, seed, params, **kw), params.mu)


def _fit_order(hs, errs):
    slope, _ = np.polyfit(np.log(hs), np.log(errs), 1)
    return float(slope)


def _order_above_floor(hs, errs, floor):
    """Slope over the leading levels before the residual stops falling.

    Returns ``(order, stop)`` where ``stop`` is None if every level converged,
    "floor" if the residual ran into the rounding / ODE-tolerance floor and
    "plateau" if it stalled far above it (the fields do not solve the PDE).
    """
    keep, stop = [], None
    for i, e in enumerate(errs):
        stalled = bool(keep) and e > errs[keep[-1]] / 1.5
        if e <= floor or stalled:
            stop = "plateau" if e > 1e4 * floor else "floor"
            break
        keep.append(i)
    if stop == "plateau":
        # report the (near zero) slope across all levels rather than nothing
        return _fit_order(hs, errs), stop
    if len(keep) < 2:
        return None, stop or "floor"
    return _fit_order([hs[i] for i in keep], [errs[i] for i in keep]), stop


def verify(grid: GridSpec, seed: SeedData, params: ModelParams, *, levels: int = 1,
           rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, y_equation="ode28") -> ResidualReport:
    """Residual report on ``grid``; with ``levels >= 3`` also a grid-halving study.

    The report's norms are those of the finest level.
    """
    traj = trajectory_for(grid, seed, params, rtol=rtol, atol=atol, y_equation=y_equation)
    floor = 100 * rtol
    rows, notes = [], []
    g = grid
    for _ in range(max(levels, 1)):
        s = sample_grid(g, seed, params, trajectory=traj)
        mass = mass_residual(s)
        mom = momentum_residual(s)
        try:
            noncons = momentum_residual(s, "nonconservative").norms
        except VacuumOnGrid:
            noncons = None
        ns = navier_stokes_residual(s, params.mu).norms if params.mu > 0 else None
        rows.append({"nt": g.nt, "nx": g.nx, "h": s.h, "k": s.k,
                     "mass_max": mass.norms.max, "momentum_max": mom.norms.max,
                     "ns_max": None if ns is None else ns.max})
        if s.kink and "boundary_kink" not in notes:
            notes.append("boundary_kink")
            warnings.warn("lattice crosses the vacuum boundary; expect reduced order",
                          BoundaryKinkWarning, stacklevel=2)
        g = g.refined()

    order = None
    if levels >= 3:
        hs = [r["h"] for r in rows]
        orders = []
        for key in ("mass_max", "momentum_max"):
            p, stop = _order_above_floor(hs, [r[key] for r in rows], floor)
            if stop == "plateau":
                notes.append(f"{key.split('_')[0]}_plateau")
            elif stop == "floor":
                notes.append(f"{key.split('_')[0]}_floor_limited")
            if p is not None:
                orders.append(p)
        order = min(orders) if orders else None
    return ResidualReport(grid=GridSpec(grid.t_range, rows[-1]["nt"], rows[-1]["nx"],
                                        s.window, grid.margin),
                          window=s.window, mass_residual=mass.norms,
                          momentum_residual=mom.norms,
                          nonconservative_momentum_residual=noncons, ns_residual=ns,
                          observed_order=order, ode_tolerance_floor=floor, levels=rows,
                          warnings=notes)


def convergence_study(seed: SeedData, params: ModelParams, base_grid: GridSpec,
                      levels: int = 3, **kw):
    """Observed order of the max-norm residuals under grid halving.

    Returns ``(order, report)``; order is None when every level already sits
    at the rounding / ODE-tolerance floor.
    """
    if levels < 3:
        raise ValueError("a convergence study needs at least three levels")
    report = verify(base_grid, seed, params, levels=levels, **kw)
    return report.observed_order, report


def total_mass(state, params: ModelParams, xi: float, quad_tol: float = 1e-10) -> float:
    """Integral of rho over its support.

    Near each root rho ~ d**n with n = 1/(gamma-1); the substitution
    d = v**(1/(n+1)) makes the integrand bounded and nonzero there.
    """
    s = support(state, params, xi)
    if s.kind is SupportKind.EMPTY_INTERIOR:
        return 0.0
    if s.kind is not SupportKind.INTERVAL:
        raise UnboundedSupport(f"support is {s.kind.value}; mass is not finite")
    n = 1.0 / (params.gamma - 1.0)
    xl, xr = s.x_left, s.x_right
    half = 0.5 * (xr - xl)
    v_max = half ** (n + 1.0)

    def piece(origin, sign):
        def f(v):
            d = v ** (1.0 / (n + 1.0))
            return eval_density(origin + sign * d, state, params, xi) * d ** -n / (n + 1.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", spi.IntegrationWarning)
            val, err = spi.quad(f, 0.0, v_max, epsabs=quad_tol / 4, epsrel=1e-13, limit=200)
        return val, err

    left, e1 = piece(xl, 1.0)
    right, e2 = piece(xr, -1.0)
    total = left + right
    if e1 + e2 > max(quad_tol, 1e-13 * total):
        raise QuadratureFailure(f"mass quadrature error estimate {e1 + e2:.3e} exceeds {quad_tol}")
    return total
