"""Blowup or global existence of the scale factor a(t), and blowup times.

The Emden equation a'' = xi / a**kappa conserves
E = 1/2 a'^2 + xi a**(1-kappa) / (kappa-1). Collapse a -> 0 in finite time
happens for xi < 0 below the escape speed sqrt(-2 xi / (kappa-1)) a0**((1-kappa)/2)
and for xi = 0 with a1 < 0; everything else exists for all time.
"""

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate as spi

from .errors import NotABlowupSeed, NotABlowupTrajectory, QuadratureFailure
from .ode_core import ModelParams, SeedData, Trajectory, emden_energy

# relative width of the band around the escape speed treated as equality
_TIE_RTOL = 8 * np.finfo(float).eps


class Verdict(enum.Enum):
    BLOWUP_FINITE_TIME = "BlowupFiniteTime"
    GLOBAL = "Global"


class Criterion(enum.Enum):
    XI_NEG_SUBTHRESHOLD = "xi<0, a1 below escape speed"
    XI_NEG_ESCAPE = "xi<0, a1 at or above escape speed"
    XI_ZERO_CONTRACTING = "xi=0, a1<0"
    XI_ZERO_NONCONTRACTING = "xi=0, a1>=0"
    XI_POS = "xi>0"


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    criterion: Criterion
    energy: float
    T_formula: Optional[float] = None
    T_numeric: Optional[float] = None

    @property
    def blowup(self) -> bool:
        return self.verdict is Verdict.BLOWUP_FINITE_TIME

    @property
    def T(self) -> Optional[float]:
        return self.T_formula if self.T_formula is not None else self.T_numeric


def energy(seed: SeedData, params: ModelParams, kappa: Optional[float] = None) -> float:
    kappa = params.gamma if kappa is None else kappa
    return emden_energy(seed.a0, seed.a1, seed.xi, kappa)


def escape_speed(xi: float, a0: float, kappa: float) -> float:
    """sqrt(-2 xi / (kappa-1)) a0**((1-kappa)/2), defined for xi <= 0."""
    return math.sqrt(-2.0 * xi / (kappa - 1.0)) * a0 ** ((1.0 - kappa) / 2.0)


def classify(seed: SeedData, params: ModelParams, *, kappa: Optional[float] = None,
             with_numeric: bool = False, quad_tol: float = 1e-12) -> Classification:
    """Apply the blowup lemma to (xi, a0, a1, kappa); b0, b1 and alpha play no role.

    ``kappa`` defaults to gamma. An a1 equal to the escape speed up to rounding
    is the parabolic escape and classifies as global.
    """
    kappa = params.gamma if kappa is None else kappa
    xi, a0, a1 = seed.xi, seed.a0, seed.a1
    E = emden_energy(a0, a1, xi, kappa)
    T_formula = None
    if xi < 0:
        vesc = escape_speed(xi, a0, kappa)
        if a1 < vesc and not math.isclose(a1, vesc, rel_tol=_TIE_RTOL):
            verdict, crit = Verdict.BLOWUP_FINITE_TIME, Criterion.XI_NEG_SUBTHRESHOLD
        else:
            verdict, crit = Verdict.GLOBAL, Criterion.XI_NEG_ESCAPE
    elif xi == 0:
        if a1 < 0:
            verdict, crit = Verdict.BLOWUP_FINITE_TIME, Criterion.XI_ZERO_CONTRACTING
            T_formula = -a0 / a1
        else:
            verdict, crit = Verdict.GLOBAL, Criterion.XI_ZERO_NONCONTRACTING
    else:
        verdict, crit = Verdict.GLOBAL, Criterion.XI_POS
    result = Classification(verdict, crit, E, T_formula)
    if with_numeric and result.blowup:
        T_num = blowup_time_quadrature(seed, params, quad_tol, kappa=kappa, _cls=result)
        result = Classification(verdict, crit, E, T_formula, T_num)
    return result


def _quad(func, lo, hi, tol):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", spi.IntegrationWarning)
        val, err, info = spi.quad(func, lo, hi, epsabs=tol, epsrel=1e-13, limit=500,
                                  full_output=1)[:3]
    # the absolute target is floored at what double precision can resolve in val
    if not math.isfinite(val) or err > max(tol, 1e-12 * abs(val)):
        raise QuadratureFailure(f"quadrature on [{lo}, {hi}] stalled: error estimate {err:.3e}")
    return val


def blowup_time_quadrature(seed: SeedData, params: ModelParams, tol: float = 1e-12, *,
                           kappa: Optional[float] = None, _cls=None) -> float:
    """Collapse time from the energy integral T = int da / |a'(a)|.

    For a1 > 0 the motion rises to a_max first; both legs meet the turnaround
    with an inverse square-root singularity, removed by a = a_max - s**2.
    """
    kappa = params.gamma if kappa is None else kappa
    cls = _cls or classify(seed, params, kappa=kappa)
    if not cls.blowup:
        raise NotABlowupSeed(f"seed classifies as {cls.verdict.value}")
    xi, a0, a1 = seed.xi, seed.a0, seed.a1
    if xi == 0:
        return _quad(lambda a: 1.0 / -a1, 0.0, a0, tol)

    k1 = 1.0 - kappa
    coef = -2.0 * xi / (kappa - 1.0)  # > 0

    if a1 < 0:
        # speed^2 = a1^2 + coef (a^(1-k) - a0^(1-k)), regular on (0, a0]
        def integrand(a):
            if a == 0.0:
                return 0.0
            v2 = a1 * a1 + coef * a0**k1 * math.expm1(k1 * math.log(a / a0))
            return 1.0 / math.sqrt(v2)
        return _quad(integrand, 0.0, a0, tol)

    # a1 >= 0: turnaround at a_max where the speed vanishes
    a_max = a0 if a1 == 0 else (a0**k1 - a1 * a1 / coef) ** (1.0 / k1)

    def leg(s):
        # a = a_max - s^2, speed^2 = coef (a^(1-k) - a_max^(1-k))
        if s == 0.0:
            return 2.0 / math.sqrt(coef * -k1 * a_max ** (k1 - 1.0))
        a = a_max - s * s
        if a <= 0.0:
            return 0.0
        v2 = coef * a_max**k1 * math.expm1(k1 * math.log1p(-s * s / a_max))
        return 2.0 * s / math.sqrt(v2)

    down = _quad(leg, 0.0, math.sqrt(a_max), tol / 2)
    if a1 == 0:
        return down
    up = _quad(leg, 0.0, math.sqrt(a_max - a0), tol / 2)
    return up + down


def velocity_gradient_blowup_check(trajectory: Trajectory,
                                   bounds: Sequence[float] = (10.0, 1e2, 1e3)) -> dict:
    """First times at which |a'/a| (the velocity gradient u_x) reaches each bound.

    Returns ``{M: t_M}``; ``t_M`` is None if the bound is never reached within
    the trajectory.
    """
    if not trajectory.blowup:
        raise NotABlowupTrajectory("trajectory completed without collapse")
    t = trajectory.t
    grad = np.abs(trajectory.Y[:, 1] / trajectory.Y[:, 0])
    out = {}
    for M in bounds:
        hits = np.nonzero(grad >= M)[0]
        if len(hits) == 0:
            out[M] = None
            continue
        i = int(hits[0])
        if i == 0:
            out[M] = float(t[0])
            continue
        lo, hi = float(t[i - 1]), float(t[i])

        def g(tt):
            v = trajectory(tt)
            return abs(v[1] / v[0]) - M

        for _ in range(200):
            if hi - lo <= 1e-14 * max(1.0, hi):
                break
            mid = 0.5 * (lo + hi)
            if g(mid) >= 0:
                hi = mid
            else:
                lo = mid
        out[M] = 0.5 * (lo + hi)
    return out
