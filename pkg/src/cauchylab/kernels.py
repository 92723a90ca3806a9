"""Hot numerical kernels: adaptive Dormand-Prince integration of linear ODE systems.

The systems integrated here are the first-order forms of

    sum_{j=0}^{d} a_j(x) u^{(j)}(x) = 0,      a_j(x) m-by-m matrix polynomials,

with state ``y = (u, u', ..., u^{(d-1)})`` (length ``d*m``). All columns of a
state matrix ``Y`` are advanced together, so a full fundamental matrix costs
one integration.

Every function below is compiled with ``numba.njit`` unless the environment
flag ``CAUCHYLAB_DISABLE_NUMBA`` is set at import time, in which case the very
same source runs as plain numpy code (see :mod:`cauchylab._backend`).
"""

from __future__ import annotations

import numpy as np

from . import _backend

_kernel = _backend.kernel
BACKEND = "numba" if _backend.USE_NUMBA else "numpy"

# Dormand-Prince 5(4) tableau.
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0

STATUS_OK = 0
STATUS_MAX_STEPS = 1
STATUS_STEP_UNDERFLOW = 2
STATUS_NONFINITE = 3


@_kernel
def poly_matrix(c, x):
    # Horner evaluation of a matrix polynomial c[0] + c[1] x + ...
    p = c.shape[0]
    out = c[p - 1].copy()
    for i in range(p - 2, -1, -1):
        out = out * x + c[i]
    return out


@_kernel
def rhs(coeffs, d, m, x, Y):
    n = d * m
    out = np.empty_like(Y)
    if d > 1:
        out[: n - m] = Y[m:]
    acc = np.zeros_like(Y[:m])
    for j in range(d):
        acc += poly_matrix(coeffs[j], x) @ np.ascontiguousarray(Y[j * m : (j + 1) * m])
    out[n - m :] = -np.linalg.solve(poly_matrix(coeffs[d], x), acc)
    return out


@_kernel
def error_ratio(err, y_old, y_new, rtol, atol):
    worst = 0.0
    flat_e = err.ravel()
    flat_a = y_old.ravel()
    flat_b = y_new.ravel()
    for i in range(flat_e.size):
        scale = atol + rtol * max(abs(flat_a[i]), abs(flat_b[i]))
        r = abs(flat_e[i]) / scale
        if r > worst:
            worst = r
    return worst


@_kernel
def integrate(coeffs, d, m, x0, Y0, x_out, rtol, atol, h0, max_steps):
    n_out = x_out.shape[0]
    out = np.zeros((n_out, Y0.shape[0], Y0.shape[1]), dtype=Y0.dtype)
    x = x0
    Y = Y0.copy()
    h = h0
    if h <= 0.0:
        h = 1e-3 * max(abs(x_out[n_out - 1] - x0), 1e-300)
    k1 = rhs(coeffs, d, m, x, Y)
    steps = 0
    status = STATUS_OK
    i_out = 0
    while i_out < n_out and x_out[i_out] <= x:
        out[i_out] = Y
        i_out += 1
    while i_out < n_out:
        target = x_out[i_out]
        if steps >= max_steps:
            status = STATUS_MAX_STEPS
            break
        hit = False
        if x + h >= target:
            h = target - x
            hit = True
        if h <= 1e-15 * max(abs(x), 1e-300):
            status = STATUS_STEP_UNDERFLOW
            break
        k2 = rhs(coeffs, d, m, x + _C2 * h, Y + h * (_A21 * k1))
        k3 = rhs(coeffs, d, m, x + _C3 * h, Y + h * (_A31 * k1 + _A32 * k2))
        k4 = rhs(coeffs, d, m, x + _C4 * h, Y + h * (_A41 * k1 + _A42 * k2 + _A43 * k3))
        k5 = rhs(
            coeffs, d, m, x + _C5 * h, Y + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4)
        )
        k6 = rhs(
            coeffs,
            d,
            m,
            x + h,
            Y + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5),
        )
        Y_new = Y + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
        x_new = target if hit else x + h
        k7 = rhs(coeffs, d, m, x_new, Y_new)
        err = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
        ratio = error_ratio(err, Y, Y_new, rtol, atol)
        steps += 1
        if not np.isfinite(ratio):
            if h < 1e-300:
                status = STATUS_NONFINITE
                break
            h = h * MIN_FACTOR
            continue
        if ratio <= 1.0:
            x = x_new
            Y = Y_new
            k1 = k7
            if hit:
                out[i_out] = Y
                i_out += 1
                while i_out < n_out and x_out[i_out] <= x:
                    out[i_out] = Y
                    i_out += 1
            if ratio == 0.0:
                factor = MAX_FACTOR
            else:
                factor = min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * ratio ** (-0.2)))
            h = h * factor
        else:
            factor = max(MIN_FACTOR, SAFETY * ratio ** (-0.2))
            h = h * factor
    return out, steps, status


def integrate_linear(coeffs, d, m, x0, Y0, x_out, rtol=1e-11, atol=1e-11, h0=0.0, max_steps=200_000):
    """Integrate ``sum_j a_j(x) u^{(j)} = 0`` in first-order form.

    Parameters
    ----------
    coeffs : ndarray, shape (d+1, P, m, m), complex
        ``coeffs[j, p]`` is the coefficient of ``x**p`` in ``a_j``.
    d, m : int
        Order and fiber dimension.
    x0 : float
        Start point.
    Y0 : ndarray, shape (d*m, k), complex
        Initial jets ``(u, u', ..., u^{(d-1)})`` stacked blockwise, one column
        per trajectory.
    x_out : array_like
        Increasing output points, all ``>= x0``.
    rtol, atol : float
        Per-component tolerances of the embedded error estimate.
    h0 : float
        Initial step; ``<= 0`` picks a default.

    Returns
    -------
    Y : ndarray, shape (len(x_out), d*m, k)
    steps : int
        Number of attempted steps.
    status : int
        ``STATUS_OK`` on success.
    """
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    Y0 = np.ascontiguousarray(Y0, dtype=np.complex128)
    x_out = np.ascontiguousarray(np.atleast_1d(x_out), dtype=np.float64)
    if np.any(np.diff(x_out) < 0) or x_out[0] < x0:
        raise ValueError("output points must be increasing and not before x0")
    return integrate(coeffs, int(d), int(m), float(x0), Y0, x_out, float(rtol), float(atol), float(h0), int(max_steps))
