"""Adaptive integration of the reduced system (a, a', b, b', y).

``a`` is the Emden scale factor (velocity slope c = a'/a), ``b`` the spatially
uniform velocity offset and ``y`` the value of rho**(gamma-1) at x = 0 before
vacuum truncation.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _dopri
from .errors import (
    EvaluationError,
    InvalidTolerance,
    NotABlowupTrajectory,
    PerturbEulerError,
    StepSizeUnderflow,
)

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
COLLAPSE_FACTOR = 1e-8

Y_EQUATIONS = ("ode28", "theorem")

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
# PI controller exponents (Gustafsson / Hairer): alpha = 1/5 - 0.75 * beta
_BETA = 0.04
_ALPHA = 1.0 / _dopri.ORDER - 0.75 * _BETA
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of P = K rho**gamma, plus an optional viscosity."""

    K: float
    gamma: float
    mu: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.K) and self.K > 0):
            raise ValueError(f"K must be positive, got {self.K}")
        if not (math.isfinite(self.gamma) and self.gamma > 1):
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if not (math.isfinite(self.mu) and self.mu >= 0):
            raise ValueError(f"mu must be nonnegative, got {self.mu}")


@dataclass(frozen=True)
class SeedData:
    """Initial data selecting one member of the solution family."""

    a0: float
    a1: float
    xi: float
    b0: float = 0.0
    b1: float = 0.0
    alpha: float = 1.0

    def __post_init__(self):
        for name in ("a0", "a1", "xi", "b0", "b1", "alpha"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.a0 <= 0:
            raise ValueError(f"a0 must be positive, got {self.a0}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")

    def y0(self, params: ModelParams) -> float:
        return self.alpha ** (params.gamma - 1.0)

    def initial_state(self, params: ModelParams) -> "TrajectoryState":
        return TrajectoryState(0.0, self.a0, self.a1, self.b0, self.b1, self.y0(params))


@dataclass(frozen=True)
class TrajectoryState:
    t: float
    a: float
    adot: float
    b: float
    bdot: float
    y: float

    @classmethod
    def from_vector(cls, t, vec):
        return cls(float(t), *(float(v) for v in vec))

    def as_vector(self) -> np.ndarray:
        return np.array([self.a, self.adot, self.b, self.bdot, self.y])

    @property
    def hubble(self) -> float:
        """Velocity slope c = a'/a."""
        return self.adot / self.a


class Status(enum.Enum):
    COMPLETED = "completed"
    BLOWUP_DETECTED = "blowup_detected"


def emden_rhs(a: float, params: ModelParams, xi: float) -> float:
    """Acceleration of the scale factor, xi / a**gamma."""
    if not a > 0:
        raise EvaluationError(f"scale factor must be positive, got {a}")
    val = xi / a**params.gamma
    if not math.isfinite(val):
        raise EvaluationError(f"non-finite acceleration at a={a}")
    return val


def _rhs_floats(a, adot, b, bdot, y, gamma, K, xi, y_equation="ode28"):
    if not a > 0:
        raise EvaluationError(f"scale factor must be positive, got {a}")
    c = adot / a
    a_pow = a**gamma
    addot = xi / a_pow
    bddot = -(1.0 + gamma) * c * bdot - (2.0 * xi / (a_pow * a) + (gamma - 1.0) * c * c) * b
    y_decay = (gamma - 1.0) if y_equation == "ode28" else 1.0
    ydot = -y_decay * c * y + (gamma - 1.0) / (K * gamma) * (bdot + b * c) * b
    out = (adot, addot, bdot, bddot, ydot)
    if not all(math.isfinite(v) for v in out):
        raise EvaluationError(f"non-finite derivative at a={a}")
    return out


# The integrator carries w = b' + b a'/a in place of b'. Near collapse b' and
# b a'/a are huge and nearly opposite, so w (which drives y and is the linear
# coefficient of the density quadratic) cannot be recovered from a stored b'.
# In these variables: b' = w - c b, w' = -gamma c w - xi b / a**(gamma+1).

def _to_internal(v):
    a, adot, b, bdot, y = v
    return np.array([a, adot, b, bdot + b * adot / a, y])


def _to_public(Z):
    """(a, a', b, w, y) -> (a, a', b, b', y) along the last axis."""
    Y = np.array(Z, dtype=float, copy=True)
    Y[..., 3] = Z[..., 3] - Z[..., 1] / Z[..., 0] * Z[..., 2]
    return Y


def coupled_rhs(state: TrajectoryState, params: ModelParams, xi: float,
                y_equation: str = "ode28") -> tuple:
    """Time derivatives (a', a'', b', b'', y') of the reduced system.

    ``y_equation="theorem"`` drops the (gamma - 1) factor on the y decay term;
    it exists only to show that this variant does not solve the PDE.
    """
    if y_equation not in Y_EQUATIONS:
        raise ValueError(f"unknown y_equation {y_equation!r}")
    return _rhs_floats(state.a, state.adot, state.b, state.bdot, state.y,
                       params.gamma, params.K, xi, y_equation)


def emden_energy(a, adot, xi, gamma):
    """Conserved energy 1/2 a'^2 + xi a**(1-gamma) / (gamma-1) of the Emden equation."""
    return 0.5 * adot * adot + xi * a ** (1.0 - gamma) / (gamma - 1.0)


def collapse_exponent(xi: float, gamma: float) -> float:
    """Exponent p in a(t) ~ (T - t)**p as a collapses to zero."""
    return 2.0 / (gamma + 1.0) if xi < 0 else 1.0


class Trajectory:
    """Accepted integration steps with a per-step continuous extension.

    ``Y`` holds the public states (a, a', b, b', y). Interpolation runs on the
    integration variables (a, a', b, w, y), w = b' + b a'/a, and is converted.
    """

    def __init__(self, t, Z, Q, status, stop_time, *, seed, params, rtol, atol,
                 collapse_threshold, y_equation="ode28", detection=None):
        self.t = np.asarray(t, dtype=float)
        self.Z = np.asarray(Z, dtype=float)
        self.Y = _to_public(self.Z)
        self.Q = np.asarray(Q, dtype=float).reshape(len(self.t) - 1, self.Z.shape[1], 4)
        self.status = status
        self.stop_time = stop_time
        self.seed = seed
        self.params = params
        self.rtol = rtol
        self.atol = atol
        self.collapse_threshold = collapse_threshold
        self.y_equation = y_equation
        self.detection = detection

    def __len__(self):
        return len(self.t)

    @property
    def xi(self):
        return self.seed.xi

    @property
    def blowup(self) -> bool:
        return self.status is Status.BLOWUP_DETECTED

    @property
    def blowup_time(self):
        return self.stop_time if self.blowup else None

    @property
    def t_max(self) -> float:
        """Right end of the interval covered by dense output."""
        return float(self.t[-1])

    @property
    def states(self):
        return [TrajectoryState.from_vector(t, y) for t, y in zip(self.t, self.Y)]

    @property
    def b_peak(self) -> float:
        """Largest |b| or |b'| over the accepted states.

        Nothing bounds b before a collapses; this is a monitor, not a guarantee.
        """
        return float(np.max(np.abs(self.Y[:, 2:4])))

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t[0]) or np.any(t > self.t[-1]):
            raise ValueError(f"time outside covered range [{self.t[0]}, {self.t[-1]}]")
        if len(self.t) == 1:
            raise ValueError("trajectory has no steps")
        idx = np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, len(self.t) - 2)
        h = self.t[idx + 1] - self.t[idx]
        theta = (t - self.t[idx]) / h
        return idx, h, theta

    def internal(self, t) -> np.ndarray:
        """Dense integration variables (a, a', b, w, y) at time(s) ``t``."""
        idx, h, theta = self._locate(t)
        powers = np.stack([theta, theta**2, theta**3, theta**4], axis=-1)
        return self.Z[idx] + np.einsum("...k,...nk->...n", powers, self.Q[idx])

    def _internal_derivative(self, t):
        idx, h, theta = self._locate(t)
        dp = np.stack([np.ones_like(theta), 2 * theta, 3 * theta**2, 4 * theta**3], axis=-1)
        return np.einsum("...k,...nk->...n", dp, self.Q[idx]) / np.asarray(h)[..., None]

    def __call__(self, t) -> np.ndarray:
        """Dense state vector(s) (a, a', b, b', y) at time(s) ``t``."""
        return _to_public(self.internal(t))

    def w(self, t):
        """b' + b a'/a at time(s) ``t``, free of the cancellation in the sum."""
        return self.internal(t)[..., 3]

    def derivative(self, t) -> np.ndarray:
        """Time derivative of the interpolated public state."""
        z, dz = self.internal(t), self._internal_derivative(t)
        a, adot, b = z[..., 0], z[..., 1], z[..., 2]
        out = dz.copy()
        c = adot / a
        cdot = (dz[..., 1] * a - adot * dz[..., 0]) / (a * a)
        out[..., 3] = dz[..., 3] - cdot * b - c * dz[..., 2]
        return out

    def state_at(self, t: float) -> TrajectoryState:
        return TrajectoryState.from_vector(t, self(t))

    def energies(self) -> np.ndarray:
        a, adot = self.Y[:, 0], self.Y[:, 1]
        return emden_energy(a, adot, self.xi, self.params.gamma)


def _initial_step(f, t0, y0, f0, rtol, atol, t_span):
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t_span)
    try:
        f1 = f(t0 + h0, y0 + h0 * f0)
    except EvaluationError:
        return h0 * 1e-3
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / _dopri.ORDER)
    return float(min(100 * h0, h1, t_span))


def integrate(seed: SeedData, params: ModelParams, t_end: float,
              rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL, *,
              collapse_threshold=None, y_equation: str = "ode28",
              max_steps: int = 1_000_000) -> Trajectory:
    """Integrate the reduced system from t = 0 until ``t_end`` or collapse of a.

    Collapse is declared when an accepted step ends with a at or below
    ``collapse_threshold`` (default 1e-8 * a0), or when the step size underflows
    while the linear extrapolation of a hits zero within the unresolvable
    time window.
    """
    if not (rtol > 0 and atol > 0 and math.isfinite(rtol) and math.isfinite(atol)):
        raise InvalidTolerance(f"rtol and atol must be positive, got {rtol}, {atol}")
    if rtol < 100 * _EPS:
        raise InvalidTolerance(f"rtol={rtol} is below what double precision can honour")
    if not t_end > 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    if y_equation not in Y_EQUATIONS:
        raise ValueError(f"unknown y_equation {y_equation!r}")
    threshold = float(COLLAPSE_FACTOR * seed.a0 if collapse_threshold is None
                      else collapse_threshold)
    rtol, atol, t_end = float(rtol), float(atol), float(t_end)
    gamma, K, xi = params.gamma, params.K, seed.xi
    y_decay = (gamma - 1.0) if y_equation == "ode28" else 1.0
    p = collapse_exponent(xi, gamma)

    gamma, K, xi, y_decay = float(gamma), float(K), float(xi), float(y_decay)
    forcing = (gamma - 1.0) / (K * gamma)

    def f(t, v):
        a, adot, b, w, y = v
        if not a > 0:
            raise EvaluationError(f"scale factor must be positive, got {a}")
        c = adot / a
        a_pow = a**gamma
        return (adot, xi / a_pow, w - c * b, -gamma * c * w - xi * b / (a_pow * a),
                -y_decay * c * y + forcing * w * b)

    t = 0.0
    start = seed.initial_state(params).as_vector()
    y = [float(v) for v in _to_internal(start)]
    k0 = f(t, y)
    ts, Ys, Ks, hs = [t], [y], [], []
    h = _initial_step(lambda t, v: np.array(f(t, v)), t, np.array(y), np.array(k0),
                      rtol, atol, t_end)
    err_prev = 1e-4
    rejected = False
    status, stop_time, detection = Status.COMPLETED, t_end, None

    for _ in range(max_steps):
        if t >= t_end:
            break
        h_min = 16 * _EPS * max(1.0, abs(t))
        if h < h_min:
            a, adot = y[0], y[1]
            remaining = p * a / -adot if adot < 0 else math.inf
            if remaining <= 1e-9 * max(1.0, abs(t)):
                status, stop_time, detection = Status.BLOWUP_DETECTED, t + remaining, "step_underflow"
                break
            raise StepSizeUnderflow(
                f"step size {h:.3e} underflowed at t={t!r} without collapse",
                state=TrajectoryState.from_vector(t, _to_public(y)))
        last = t + h >= t_end
        if last:
            h = t_end - t
        try:
            y_new, err, Kst = _dopri.step(f, t, y, h, k0)
        except EvaluationError:
            h *= 0.25
            rejected = True
            continue
        err_norm = math.sqrt(sum((e / (atol + rtol * max(abs(u), abs(v)))) ** 2
                                 for e, u, v in zip(err, y, y_new)) / len(y))
        if not math.isfinite(err_norm):
            h *= 0.25
            rejected = True
            continue
        if err_norm <= 1.0:
            if err_norm == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = _SAFETY * err_norm ** -_ALPHA * err_prev**_BETA
                factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            if rejected:
                factor = min(1.0, factor)
            err_prev = max(err_norm, 1e-4)
            rejected = False
            Ks.append(Kst)
            hs.append(h)
            t = t_end if last else t + h
            y = y_new
            k0 = Kst[6]
            ts.append(t)
            Ys.append(y)
            if y[0] <= threshold:
                status, detection = Status.BLOWUP_DETECTED, "threshold"
                break
            h *= factor
        else:
            h *= max(_MIN_FACTOR, _SAFETY * err_norm ** -_ALPHA)
            rejected = True
    else:
        raise PerturbEulerError(f"max_steps={max_steps} exhausted at t={t}")

    Q = _dopri.dense_coefficients(np.reshape(Ks, (len(Ks), 7, 5)), hs)
    traj = Trajectory(ts, Ys, Q, status, stop_time,
                      seed=seed, params=params, rtol=rtol, atol=atol,
                      collapse_threshold=threshold, y_equation=y_equation,
                      detection=detection)
    traj.Y[0] = start  # exact, not round-tripped through w
    if status is Status.BLOWUP_DETECTED and detection == "threshold":
        traj.stop_time = refine_collapse_time(traj)
    return traj


def collapse_crossing_time(trajectory: Trajectory, threshold=None) -> float:
    """Time at which the dense a(t) first equals ``threshold``, by bisection.

    Only the final accepted step is searched; earlier steps all end above the
    trajectory's own threshold.
    """
    if not trajectory.blowup:
        raise NotABlowupTrajectory("trajectory completed without collapse")
    thr = trajectory.collapse_threshold if threshold is None else threshold
    a = trajectory.Y[:, 0]
    if a[-1] > thr:
        raise ValueError(f"threshold {thr} is below the last computed a={a[-1]}")
    i = int(np.nonzero(a > thr)[0][-1])
    # bisect in the step's fractional position on the scalar quartic for a
    a0, (q1, q2, q3, q4) = float(trajectory.Z[i, 0]), (float(v) for v in trajectory.Q[i, 0])
    t0, h = float(trajectory.t[i]), float(trajectory.t[i + 1] - trajectory.t[i])
    lo, hi = 0.0, 1.0
    for _ in range(200):
        if (hi - lo) * h <= 1e-13 * max(1.0, abs(t0 + h)):
            break
        mid = 0.5 * (lo + hi)
        if a0 + mid * (q1 + mid * (q2 + mid * (q3 + mid * q4))) > thr:
            lo = mid
        else:
            hi = mid
    return t0 + 0.5 * (lo + hi) * h


def refine_collapse_time(trajectory: Trajectory, threshold=None) -> float:
    """Blowup time T: the threshold crossing plus the remaining time to a = 0.

    The remaining time uses the leading-order collapse law a ~ (T - t)**p, so
    T = t_cross + p * a / |a'| evaluated at the crossing.
    """
    if not trajectory.blowup:
        raise NotABlowupTrajectory("trajectory completed without collapse")
    p = collapse_exponent(trajectory.xi, trajectory.params.gamma)
    thr = trajectory.collapse_threshold if threshold is None else threshold
    a_last, adot_last = trajectory.Y[-1, 0], trajectory.Y[-1, 1]
    if a_last > thr:
        # stopped by step underflow, or a lower threshold than was integrated to
        return float(trajectory.t[-1] + p * a_last / abs(adot_last))
    t_cross = collapse_crossing_time(trajectory, thr)
    a, adot = trajectory(t_cross)[:2]
    return float(t_cross + p * a / abs(adot))
