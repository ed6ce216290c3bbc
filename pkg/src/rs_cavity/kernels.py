"""Model families: log-densities, samplers, proximal maps, special functions.

Two families are implemented:

* Logit -- binary labels t in {-1, +1} with p(t|y) = e^{t y} / (2 cosh y).
* Weibull proportional hazards -- positive times with integrated base
  hazard H(t | phi, sigma) = e^{phi/sigma} t^{1/sigma} (so the usual
  Weibull scale/shape are lambda = e^{phi}, rho = 1/sigma).

The proximal mapping of a concave log-density rho at cavity field x with
strength mu2 is argmin_y { (y-x)^2 / (2 mu2) - rho(t|y) }; it has a closed
form for both families (tanh fixed point, Lambert W).  ``numeric_proximal``
is a generic bracketed minimizer kept as a test oracle and as the extension
point for new families.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import minimize_scalar

from .backend import lambert_from_log_grid, tanh_prox_grid


class Family(Enum):
    LOGIT = "logit"
    WEIBULL_PH = "weibull"


@dataclass(frozen=True)
class NuisanceParams:
    """Weibull nuisance parameters (log-scale phi, shape reciprocal sigma)."""

    phi: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class GlmKernel:
    """Model-family descriptor used by the fitter and the harness."""

    family: Family
    nuisance_dim: int

    def logdensity(self, t, y, nuisance=None):
        if self.family is Family.LOGIT:
            return logit_logdensity(t, y)
        return weibull_logdensity(t, y, nuisance.phi, nuisance.sigma)

    def sample(self, y, nuisance, rng):
        if self.family is Family.LOGIT:
            return sample_logit(y, rng)
        return sample_weibull(y, nuisance.phi, nuisance.sigma, rng)


LOGIT = GlmKernel(Family.LOGIT, 0)
WEIBULL_PH = GlmKernel(Family.WEIBULL_PH, 2)


def _validate_labels(t):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isin(t, (-1.0, 1.0))):
        raise ValueError("logit labels must be in {-1, +1}")
    return t


def logit_logdensity(t, y):
    """log p(t|y) = t*y - log(2 cosh y), overflow-safe for any y."""
    t = _validate_labels(t)
    y = np.asarray(y, dtype=float)
    ay = np.abs(y)
    out = t * y - ay - np.log1p(np.exp(-2.0 * ay))
    return out if out.ndim else float(out)

def sample_logit(y, rng):
    """Draw labels with P(+1 | y) = e^y / (2 cosh y) = sigmoid(2y)."""
    y = np.asarray(y, dtype=float)
    p_plus = 0.5 * (1.0 + np.tanh(y))
    t = np.where(rng.random(y.shape) < p_plus, 1.0, -1.0)
    return t if t.ndim else float(t)


def solve_tanh_fixed_point(a, b):
    """Unique root of x + b*tanh(x) = a for b >= 0.

    The left side has slope >= 1, so the root is unique and lies in
    [a - b, a + b]; safeguarded Newton with residual below 1e-12.
    """
    if np.any(np.asarray(b) < 0):
        raise ValueError("coupling b must be nonnegative")
    a_arr = np.atleast_1d(np.asarray(a, dtype=float))
    x = tanh_prox_grid(a_arr, float(b))
    return float(x[0]) if np.ndim(a) == 0 else x.reshape(np.shape(a))


def logit_proximal(x, mu2, t):
    """Proximal map of the logit log-density: solves
    xi = x + mu2*t - mu2*tanh(xi)."""
    if mu2 <= 0:
        raise ValueError("mu2 must be positive")
    t = _validate_labels(t)
    return solve_tanh_fixed_point(np.asarray(x, dtype=float) + mu2 * t, mu2)


def lambert_w0(x):
    """Principal branch of Lambert's W on x >= 0, residual below
    1e-12 * max(1, x)."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise ValueError("lambert_w0 requires x >= 0 (principal branch only)")
    with np.errstate(divide="ignore"):
        ell = np.log(np.atleast_1d(x_arr))  # -inf at 0 is fine: W(0) = 0
    w = lambert_from_log_grid(ell)
    w = np.where(np.atleast_1d(x_arr) == 0.0, 0.0, w)
    return float(w[0]) if x_arr.ndim == 0 else w.reshape(x_arr.shape)


def weibull_H(t, phi, sigma):
    """Integrated base hazard e^{phi/sigma} t^{1/sigma}."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("event times must be positive")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    out = np.exp((phi + np.log(t)) / sigma)
    return out if out.ndim else float(out)


def weibull_logdensity(t, y, phi, sigma):
    """log p(t|y, phi, sigma) for the proportional-hazards density
    h(t) e^{y - H(t) e^y}."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("event times must be positive")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    log_t = np.log(t)
    log_h = -np.log(sigma) + (phi + log_t) / sigma - log_t
    out = log_h + y - np.exp((phi + log_t) / sigma + y)
    return out if out.ndim else float(out)


def sample_weibull(y, phi0, sigma0, rng):
    """Draw times T with H(T|phi0, sigma0) e^y ~ Exp(1), i.e.
    T = (Z e^{-y})^{sigma0} e^{-phi0}."""
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    y = np.asarray(y, dtype=float)
    z = rng.exponential(size=y.shape)
    t = np.exp(sigma0 * (np.log(z) - y) - phi0)
    return t if t.ndim else float(t)


def weibull_proximal(x, mu2, H_val):
    """Proximal map of the hazard log-density:
    xi = x + mu2 - W(H_val * mu2 * e^{mu2 + x})."""
    if mu2 <= 0:
        raise ValueError("mu2 must be positive")
    x_b, h_b = np.broadcast_arrays(
        np.atleast_1d(np.asarray(x, dtype=float)), np.asarray(H_val, dtype=float)
    )
    if np.any(h_b < 0):
        raise ValueError("H_val must be nonnegative")
    with np.errstate(divide="ignore"):
        ell = np.log(h_b) + np.log(mu2) + mu2 + x_b  # -inf at H=0 gives W=0
    out = x_b + mu2 - lambert_from_log_grid(ell)
    if np.ndim(x) == 0 and np.ndim(H_val) == 0:
        return float(out[0])
    return out.reshape(np.broadcast_shapes(np.shape(x), np.shape(H_val)))


def glm_score_hessian(family, t, y, nuisance=None):
    """First and second derivatives of log p(t|y, .) in the linear
    predictor, plus the nuisance gradient (d/dphi, d/dsigma) for Weibull.

    Returns (score, curvature, nuisance_grad); nuisance_grad is None for
    the logit family.
    """
    family = Family(family)
    if family is Family.LOGIT:
        _validate_labels(t)
        th = np.tanh(y)
        return t - th, -(1.0 - th**2), None
    phi, sigma = nuisance.phi, nuisance.sigma
    e = weibull_H(t, phi, sigma) * np.exp(y)
    score = 1.0 - e
    m = phi + np.log(t)
    d_phi = (1.0 - e) / sigma
    d_sigma = -1.0 / sigma - m / sigma**2 * (1.0 - e)
    return score, -e, np.array([d_phi, d_sigma])


def numeric_proximal(x, mu2, logdensity, half_width=None):
    """Generic proximal map via bracketed 1-D minimization (test oracle).

    Minimizes (y - x)^2 / (2 mu2) - logdensity(y) over an interval that is
    grown until the minimum is interior.
    """
    if mu2 <= 0:
        raise ValueError("mu2 must be positive")

    def objective(yv):
        return 0.5 * (yv - x) ** 2 / mu2 - logdensity(yv)

    half = half_width if half_width is not None else max(1.0, 2.0 * mu2)
    for _ in range(60):
        res = minimize_scalar(
            objective, bounds=(x - half, x + half), method="bounded",
            options={"xatol": 1e-13},
        )
        if x - half + 1e-6 * half < res.x < x + half - 1e-6 * half:
            return float(res.x)
        half *= 4.0
    raise RuntimeError("numeric proximal bracket did not close")
