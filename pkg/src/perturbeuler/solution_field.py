"""Density and velocity fields built from a state of the reduced system.

rho**(gamma-1) is the quadratic q(x) = y - B x - C x**2 truncated at zero,
and u = (a'/a) x + b.
"""

import enum
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import DomainError, NegativeRadius
from .ode_core import ModelParams, SeedData, TrajectoryState


@dataclass(frozen=True)
class FieldSample:
    x: float
    rho: float
    u: float
    in_support: bool


class SupportKind(enum.Enum):
    INTERVAL = "interval"
    UNBOUNDED = "unbounded"
    EMPTY_INTERIOR = "empty_interior"
    HALF_LINE = "half_line"


@dataclass(frozen=True)
class SupportSet:
    """Where q(x) > 0.

    For HALF_LINE, ``orientation`` is +1 for [endpoint, inf) and -1 for
    (-inf, endpoint]. UNBOUNDED with C < 0 carries the two roots in ``roots``
    when they exist (q > 0 outside them).
    """

    kind: SupportKind
    coefficients: Tuple[float, float, float]
    x_left: Optional[float] = None
    x_right: Optional[float] = None
    orientation: Optional[int] = None
    endpoint: Optional[float] = None
    roots: Optional[Tuple[float, float]] = None

    @property
    def width(self) -> float:
        if self.kind is SupportKind.INTERVAL:
            return self.x_right - self.x_left
        if self.kind is SupportKind.EMPTY_INTERIOR:
            return 0.0
        return math.inf

    def contains(self, x) -> np.ndarray:
        y, B, C = self.coefficients
        x = np.asarray(x, dtype=float)
        return (y - B * x - C * x * x) > 0


def quadratic_coeffs(state: TrajectoryState, params: ModelParams, xi: float):
    """Coefficients (y, B, C) of rho**(gamma-1) = y - B x - C x**2."""
    g, K = params.gamma, params.K
    B = (g - 1.0) / (K * g) * (state.bdot + state.b * state.adot / state.a)
    C = (g - 1.0) * xi / (2.0 * K * g * state.a ** (g + 1.0))
    return state.y, B, C


def _density_from_q(q, gamma):
    q = np.maximum(np.asarray(q, dtype=float), 0.0)
    out = np.zeros_like(q)
    pos = q > 0
    out[pos] = np.exp(np.log(q[pos]) / (gamma - 1.0))
    return out


def eval_density(x, state: TrajectoryState, params: ModelParams, xi: float):
    """rho = max(q(x), 0)**(1/(gamma-1)); accepts scalars or arrays."""
    y, B, C = quadratic_coeffs(state, params, xi)
    x = np.asarray(x, dtype=float)
    rho = _density_from_q(y - B * x - C * x * x, params.gamma)
    return float(rho) if rho.ndim == 0 else rho


def eval_velocity(x, state: TrajectoryState):
    x = np.asarray(x, dtype=float)
    u = state.adot / state.a * x + state.b
    return float(u) if u.ndim == 0 else u


def eval_field(x: float, state: TrajectoryState, params: ModelParams, xi: float) -> FieldSample:
    rho = eval_density(x, state, params, xi)
    return FieldSample(float(x), rho, eval_velocity(x, state), rho > 0)


def _roots(y, B, C):
    """Ordered real roots of y - B x - C x**2 (C != 0), or None."""
    disc = B * B + 4.0 * C * y
    if disc <= 0:
        return None
    sq = math.sqrt(disc)
    # -C x^2 - B x + y = 0, stable form avoiding cancellation
    qq = -0.5 * (-B + math.copysign(sq, -B))
    r1 = qq / -C
    r2 = y / qq
    return (min(r1, r2), max(r1, r2))


def support_from_coeffs(y: float, B: float, C: float) -> SupportSet:
    coeffs = (y, B, C)
    if C > 0:
        r = _roots(y, B, C)
        if r is None:
            return SupportSet(SupportKind.EMPTY_INTERIOR, coeffs)
        return SupportSet(SupportKind.INTERVAL, coeffs, x_left=r[0], x_right=r[1])
    if C < 0:
        return SupportSet(SupportKind.UNBOUNDED, coeffs, roots=_roots(y, B, C))
    if B != 0:
        # y - B x > 0  <=>  x < y/B when B > 0
        return SupportSet(SupportKind.HALF_LINE, coeffs, orientation=-1 if B > 0 else 1,
                          endpoint=y / B)
    if y > 0:
        return SupportSet(SupportKind.UNBOUNDED, coeffs)
    return SupportSet(SupportKind.EMPTY_INTERIOR, coeffs)


def support(state: TrajectoryState, params: ModelParams, xi: float) -> SupportSet:
    return support_from_coeffs(*quadratic_coeffs(state, params, xi))


def radial_support(state: TrajectoryState, params: ModelParams, xi: float):
    """Positivity set restricted to r >= 0, as a tuple of (r_lo, r_hi) intervals.

    r_hi may be ``math.inf``; the tuple is empty when the density vanishes for
    every r > 0.
    """
    s = support(state, params, xi)
    if s.kind is SupportKind.INTERVAL:
        return ((max(s.x_left, 0.0), s.x_right),) if s.x_right > 0 else ()
    if s.kind is SupportKind.HALF_LINE:
        if s.orientation > 0:
            return ((max(s.endpoint, 0.0), math.inf),)
        return ((0.0, s.endpoint),) if s.endpoint > 0 else ()
    if s.kind is SupportKind.UNBOUNDED:
        if s.roots is None or s.roots[1] <= 0:
            return ((0.0, math.inf),)
        if s.roots[0] <= 0:
            return ((s.roots[1], math.inf),)
        return ((0.0, s.roots[0]), (s.roots[1], math.inf))
    return ()


def eval_radial(r: float, state: TrajectoryState, params: ModelParams, xi: float) -> FieldSample:
    """Field in the radial coordinate of the one-dimensional problem, r >= 0."""
    if r < 0:
        raise NegativeRadius(f"radius must be nonnegative, got {r}")
    return eval_field(r, state, params, xi)


def _unit_ratio_power(eps, L):
    """(exp(eps L) - 1) / eps, continuous through eps = 0."""
    return L if eps == 0 else math.expm1(eps * L) / eps


def closed_form_b_xi0(t: float, seed: SeedData, params: ModelParams):
    """Exact (b, b') for xi = 0, where a = a0 + a1 t.

    With s = a0 + a1 t the b equation is equidimensional in s with exponents
    -1 and 1 - gamma; the pair is written so gamma = 2 (double root, log
    solution) is the continuous limit.
    """
    if seed.xi != 0:
        raise DomainError("closed form requires xi = 0")
    a0, a1, b0, b1 = seed.a0, seed.a1, seed.b0, seed.b1
    s = a0 + a1 * t
    if s <= 0:
        raise DomainError(f"a0 + a1 t = {s} is not positive")
    if a1 == 0:
        return b0 + b1 * t, b1
    sigma = s / a0
    L = math.log1p(a1 * t / a0)
    eps = 2.0 - params.gamma
    g = _unit_ratio_power(eps, L)
    w = b1 * a0 / a1 + b0
    b = (b0 + w * g) / sigma
    bdot = (a1 / a0) * (-b0 + w * (math.exp(eps * L) - g)) / sigma**2
    return b, bdot


def equidimensional_exponents(gamma: float):
    """Roots of m**2 + gamma m + (gamma - 1) = 0, namely -1 and 1 - gamma."""
    return (-1.0, 1.0 - gamma)


def closed_form_y_b0(t: float, a_at_t: float, seed: SeedData, params: ModelParams) -> float:
    """Exact y for b = 0: y0 (a0/a)**(gamma-1)."""
    if seed.b0 != 0 or seed.b1 != 0:
        raise DomainError("closed form requires b0 = b1 = 0")
    g = params.gamma
    return seed.alpha ** (g - 1.0) * (seed.a0 / a_at_t) ** (g - 1.0)
