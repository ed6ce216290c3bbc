"""Kernel backend selection: numba-accelerated loops or pure numpy.

The environment variable ``RS_CAVITY_NUMBA`` picks the backend at import:

* unset or ``auto`` -- use numba when importable, else fall back to numpy;
* ``0`` / ``numpy``  -- force the pure-numpy path;
* ``1`` / ``numba``  -- require numba, raise if it cannot be imported.

``set_backend`` switches at runtime (used by the benchmark and the
equivalence tests).  Both backends satisfy identical residual contracts.
"""

import os

import numpy as np

from . import _kernels_numpy

_FORCE_NUMPY = {"0", "numpy", "off", "false"}
_FORCE_NUMBA = {"1", "numba", "on", "true"}

_active_name = None
_active_mod = None


def _load_numba_kernels():
    from . import _kernels_numba  # deferred: jit compilation on first use

    return _kernels_numba


def set_backend(name):
    """Select the kernel backend: 'numba', 'numpy' or 'auto'."""
    global _active_name, _active_mod
    name = name.lower()
    if name in _FORCE_NUMPY:
        _active_name, _active_mod = "numpy", _kernels_numpy
    elif name in _FORCE_NUMBA:
        _active_name, _active_mod = "numba", _load_numba_kernels()
    elif name == "auto" or name == "":
        try:
            _active_name, _active_mod = "numba", _load_numba_kernels()
        except ImportError:
            _active_name, _active_mod = "numpy", _kernels_numpy
    else:
        raise ValueError(f"unknown backend {name!r}")
    return _active_name


def get_backend():
    """Name of the backend currently in use ('numba' or 'numpy')."""
    return _active_name


def tanh_prox_grid(a, b, x0=None):
    """Elementwise root of x + b*tanh(x) = a on an arbitrary-shape array."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    if _active_name == "numpy":
        return _active_mod.tanh_prox_grid(a, float(b), x0)
    flat = a.ravel()
    if x0 is None:
        init = flat - b * np.tanh(flat)
    else:
        init = np.ascontiguousarray(x0, dtype=np.float64).ravel()
    return _active_mod.tanh_prox_grid(flat, float(b), init).reshape(a.shape)


def lambert_from_log_grid(ell, w0=None):
    """Elementwise Lambert W of exp(ell) on an arbitrary-shape array."""
    ell = np.ascontiguousarray(ell, dtype=np.float64)
    if _active_name == "numpy":
        return _active_mod.lambert_from_log_grid(ell, w0)
    flat = ell.ravel()
    if w0 is None:
        init = np.full_like(flat, np.nan)
    else:
        init = np.ascontiguousarray(w0, dtype=np.float64).ravel()
    return _active_mod.lambert_from_log_grid(flat, init).reshape(ell.shape)


set_backend(os.environ.get("RS_CAVITY_NUMBA", "auto"))
