"""Dormand-Prince 5(4) tableau, single step and continuous extension.

The propagating solution is the 5th order one (local extrapolation). The
interpolant is the 4th order continuous extension of Shampine, built from the
seven stage derivatives of the step (the seventh is f at the new point).
"""

import numpy as np

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])

A = np.array([
    [0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])

B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])

# difference between the 5th and the embedded 4th order weights
E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

# dense output: y(t0 + theta*h) = y0 + h * K.T @ (P @ [theta, theta^2, theta^3, theta^4])
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

ORDER = 5
N_STAGES = 7


# plain-float copies of the tableau for the unrolled stage loop
(_, _C2, _C3, _C4, _C5, _C6, _C7) = (float(v) for v in C)
_A21 = float(A[1, 0])
_A31, _A32 = (float(v) for v in A[2, :2])
_A41, _A42, _A43 = (float(v) for v in A[3, :3])
_A51, _A52, _A53, _A54 = (float(v) for v in A[4, :4])
_A61, _A62, _A63, _A64, _A65 = (float(v) for v in A[5, :5])
_A71, _A72, _A73, _A74, _A75, _A76 = (float(v) for v in A[6, :6])
_E1, _E2, _E3, _E4, _E5, _E6, _E7 = (float(v) for v in E)


def step(f, t, y, h, k0=None):
    """Take one DOPRI5 step of size ``h`` from ``(t, y)``.

    Returns ``(y_new, err, K)`` where ``err`` is the local error estimate
    (5th minus 4th order solution) and ``K`` the seven stage derivatives.
    ``k0`` may carry f(t, y) from the previous step (FSAL). ``f`` maps a list
    of floats to a sequence of floats; for a handful of components plain
    floats are several times cheaper than numpy arrays.
    """
    y = [float(v) for v in y]
    k1 = f(t, y) if k0 is None else k0
    k2 = f(t + _C2 * h, [u + h * (_A21 * a) for u, a in zip(y, k1)])
    k3 = f(t + _C3 * h, [u + h * (_A31 * a + _A32 * b) for u, a, b in zip(y, k1, k2)])
    k4 = f(t + _C4 * h, [u + h * (_A41 * a + _A42 * b + _A43 * c)
                         for u, a, b, c in zip(y, k1, k2, k3)])
    k5 = f(t + _C5 * h, [u + h * (_A51 * a + _A52 * b + _A53 * c + _A54 * d)
                         for u, a, b, c, d in zip(y, k1, k2, k3, k4)])
    k6 = f(t + _C6 * h, [u + h * (_A61 * a + _A62 * b + _A63 * c + _A64 * d + _A65 * e)
                         for u, a, b, c, d, e in zip(y, k1, k2, k3, k4, k5)])
    # the 5th order solution is the last stage point (first same as last)
    y_new = [u + h * (_A71 * a + _A72 * b + _A73 * c + _A74 * d + _A75 * e + _A76 * g)
             for u, a, b, c, d, e, g in zip(y, k1, k2, k3, k4, k5, k6)]
    k7 = f(t + _C7 * h, y_new)
    err = [h * (_E1 * a + _E2 * b + _E3 * c + _E4 * d + _E5 * e + _E6 * g + _E7 * q)
           for a, b, c, d, e, g, q in zip(k1, k2, k3, k4, k5, k6, k7)]
    return y_new, err, (k1, k2, k3, k4, k5, k6, k7)


def dense_coefficients(K, h):
    """Interpolation coefficients Q with shape (n, 4), or (steps, n, 4) for
    stacked stages K of shape (steps, 7, n) and step sizes h of shape (steps,)."""
    K = np.asarray(K, dtype=float)
    h = np.asarray(h, dtype=float)
    return h[..., None, None] * np.einsum("...kn,kj->...nj", K, P)


def dense_eval(y0, Q, theta):
    """Evaluate the interpolant at fractional positions ``theta`` in [0, 1]."""
    theta = np.asarray(theta, dtype=float)
    powers = np.stack([theta, theta**2, theta**3, theta**4], axis=-1)
    return y0 + powers @ Q.T


def dense_eval_derivative(Q, h, theta):
    """Time derivative of the interpolant at fractional positions ``theta``."""
    theta = np.asarray(theta, dtype=float)
    dpowers = np.stack([np.ones_like(theta), 2 * theta, 3 * theta**2, 4 * theta**3], axis=-1)
    return (dpowers @ Q.T) / h
