"""Numba twins of the kernels in ``_kernels_numpy``.

Same iterations and stopping rules, compiled per element with early exit.
Importing this module requires numba; ``backend`` guards the import.
"""

import math

import numpy as np
from numba import njit

_MAX_ITER = 120


@njit(cache=True)
def _sech2(x):
    e = math.exp(-abs(x))
    s = 2.0 * e / (1.0 + e * e)
    return s * s


@njit(cache=True)
def _tanh_prox_scalar(a, b, x):
    lo = a - b
    hi = a + b
    if x <= lo or x >= hi:
        x = a - b * math.tanh(a)
    tol = 1e-13 * (1.0 + abs(a) + b)
    for _ in range(_MAX_ITER):
        g = x + b * math.tanh(x) - a
        if abs(g) <= tol:
            break
        if g > 0.0:
            hi = x
        else:
            lo = x
        xn = x - g / (1.0 + b * _sech2(x))
        if xn <= lo or xn >= hi:
            xn = 0.5 * (lo + hi)
        x = xn
    return x


@njit(cache=True)
def tanh_prox_grid(a, b, x0):
    out = np.empty_like(a)
    for i in range(a.size):
        out[i] = _tanh_prox_scalar(a[i], b, x0[i])
    return out


@njit(cache=True)
def _lambert_small(ell, w):
    x = math.exp(ell)
    if not (w >= 0.0) or not math.isfinite(w):
        w = math.log1p(x)
    for _ in range(_MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= 1e-14 * (1.0 + x):
            break
        wp1 = w + 1.0
        dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w = w - dw
        if w < 0.0:
            w = 0.0
    return w


@njit(cache=True)
def _lambert_big(ell, w):
    cold = ell - math.log(ell)
    if not (w > 0.0) or not math.isfinite(w):
        w = cold
    tol = 1e-14 * max(1.0, ell)
    for _ in range(_MAX_ITER):
        f = w + math.log(w) - ell
        if abs(f) <= tol:
            break
        wn = w - f / (1.0 + 1.0 / w)
        w = wn if wn > 0.0 else cold
    return w


@njit(cache=True)
def lambert_from_log_grid(ell, w0):
    out = np.empty_like(ell)
    for i in range(ell.size):
        e = ell[i]
        if e <= 1.0:
            out[i] = _lambert_small(e, w0[i])
        else:
            out[i] = _lambert_big(e, w0[i])
    return out
