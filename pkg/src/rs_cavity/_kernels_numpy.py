"""Pure-numpy implementations of the hot scalar-root kernels.

Both kernels are elementwise safeguarded root solvers evaluated on full
quadrature grids.  The numba twins in ``_kernels_numba`` implement the same
iterations and stopping rules; either backend must satisfy the same residual
contracts:

* ``tanh_prox_grid``: |x + b*tanh(x) - a| <= 1e-13 * (1 + |a| + b)
* ``lambert_from_log_grid``: residual of w*exp(w) = exp(ell) below
  1e-14 * (1 + exp(ell)) for small arguments, 1e-14 in log form otherwise.
"""

import numpy as np

_MAX_ITER = 120


def _sech2(x):
    # (2 e^{-|x|} / (1 + e^{-2|x|}))^2, overflow-free for any x
    e = np.exp(-np.abs(x))
    s = 2.0 * e / (1.0 + e * e)
    return s * s


def tanh_prox_grid(a, b, x0=None):
    """Solve x + b*tanh(x) = a elementwise (b >= 0 scalar).

    Safeguarded Newton restricted to the bracket [a-b, a+b]; the left side
    is strictly increasing in x, so the root is unique.
    """
    a = np.asarray(a, dtype=float)
    lo = a - b
    hi = a + b
    cold = a - b * np.tanh(a)
    if x0 is None:
        x = cold.copy()
    else:
        x0 = np.asarray(x0, dtype=float)
        x = np.where((x0 > lo) & (x0 < hi), x0, cold)
    tol = 1e-13 * (1.0 + np.abs(a) + b)
    for _ in range(_MAX_ITER):
        g = x + b * np.tanh(x) - a
        active = np.abs(g) > tol
        if not active.any():
            break
        gt = g > 0
        hi = np.where(active & gt, x, hi)
        lo = np.where(active & ~gt, x, lo)
        xn = x - g / (1.0 + b * _sech2(x))
        oob = (xn <= lo) | (xn >= hi)
        xn = np.where(oob, 0.5 * (lo + hi), xn)
        x = np.where(active, xn, x)
    return x


def lambert_from_log_grid(ell, w0=None):
    """Principal-branch Lambert W of exp(ell), elementwise and overflow-safe.

    Small arguments (ell <= 1) use Halley iteration on w*e^w = x; large
    arguments solve w + log(w) = ell by Newton, which never forms exp(ell).
    """
    ell = np.asarray(ell, dtype=float)
    w = np.empty_like(ell)
    small = ell <= 1.0
    if small.any():
        x = np.exp(ell[small])
        ws = np.log1p(x)
        if w0 is not None:
            cand = np.asarray(w0, float)[small]
            ok = np.isfinite(cand) & (cand >= 0.0)
            ws = np.where(ok, cand, ws)
        tol = 1e-14 * (1.0 + x)
        for _ in range(_MAX_ITER):
            ew = np.exp(ws)
            f = ws * ew - x
            active = np.abs(f) > tol
            if not active.any():
                break
            wp1 = ws + 1.0
            dw = f / (ew * wp1 - (ws + 2.0) * f / (2.0 * wp1))
            ws = np.where(active, np.maximum(ws - dw, 0.0), ws)
        w[small] = ws
    big = ~small
    if big.any():
        el = ell[big]
        cold = el - np.log(el)
        wl = cold.copy()
        if w0 is not None:
            cand = np.asarray(w0, float)[big]
            ok = np.isfinite(cand) & (cand > 0.0)
            wl = np.where(ok, cand, wl)
        tol = 1e-14 * np.maximum(1.0, el)
        for _ in range(_MAX_ITER):
            f = wl + np.log(wl) - el
            active = np.abs(f) > tol
            if not active.any():
                break
            wn = wl - f / (1.0 + 1.0 / wl)
            wl = np.where(active, np.where(wn > 0.0, wn, cold), wl)
        w[big] = wl
    return w
