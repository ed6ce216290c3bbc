"""Finite-sample penalized maximum-likelihood fitting and overlap statistics.

The objective is the penalized log-likelihood

    sum_i log p(T_i | X_i . beta, nuisance)
        - (p/2) beta . (tau' * G + eta' * A0) beta,

with G = (1/n) sum_i X_i X_i^T the sample Gram matrix.  Newton's method
with an Armijo backtracking line search and Levenberg damping maximizes it
jointly over beta (and, for the hazard model, (phi, log sigma) so that
sigma stays positive without constraints).
"""

from dataclasses import dataclass, field

import numpy as np

from .kernels import Family, NuisanceParams

ARMIJO_SLOPE = 1e-4
ARMIJO_FACTOR = 0.5


@dataclass(frozen=True)
class FitControls:
    max_iter: int = 200
    gradient_tol: float = 1e-8
    max_backtracks: int = 60


@dataclass
class FitResult:
    beta_hat: np.ndarray = field(repr=False)
    nuisance_hat: NuisanceParams
    objective: float
    gradient_norm: float
    converged: bool
    iterations: int

    def to_dict(self):
        out = {
            "beta_hat": self.beta_hat.tolist(),
            "objective": self.objective,
            "gradient_norm": self.gradient_norm,
            "converged": self.converged,
            "iterations": self.iterations,
        }
        if self.nuisance_hat is not None:
            out["nuisance_hat"] = {"phi": self.nuisance_hat.phi,
                                   "sigma": self.nuisance_hat.sigma}
        return out


@dataclass(frozen=True)
class OverlapSample:
    k_n: float
    v_n: float
    replicate_id: int = 0

    def __post_init__(self):
        if self.v_n < 0 or not np.isfinite(self.k_n):
            raise ValueError("overlaps must be finite with v_n >= 0")


def penalty_matrix(design, penalty, a0):
    """p/2-scaled quadratic form matrix tau' G + eta' A0 (without the p/2)."""
    n, p = design.shape
    mat = np.zeros((p, p))
    if penalty.tau_prime > 0:
        mat += penalty.tau_prime * (design.T @ design) / n
    if penalty.eta_prime > 0:
        mat += penalty.eta_prime * a0
    return mat


def _logit_parts(design, labels, beta, pen_mat, p_dim):
    y = design @ beta
    th = np.tanh(y)
    ay = np.abs(y)
    loglik = float(np.sum(labels * y - ay - np.log1p(np.exp(-2.0 * ay))))
    obj = loglik - 0.5 * p_dim * float(beta @ pen_mat @ beta)
    grad = design.T @ (labels - th) - p_dim * (pen_mat @ beta)
    curv = 1.0 - th**2
    hess = -(design.T * curv) @ design - p_dim * pen_mat
    return obj, grad, hess


def _weibull_parts(design, times, theta, pen_mat, p_dim):
    # theta = (beta, phi, log sigma)
    beta, phi, log_sigma = theta[:-2], theta[-2], theta[-1]
    sigma = np.exp(log_sigma)
    y = design @ beta
    log_t = np.log(times)
    m = phi + log_t
    expo = y + m / sigma
    if np.max(expo) > 690.0:
        return -np.inf, None, None  # line search rejects this point
    e = np.exp(expo)
    loglik = float(np.sum(-log_sigma + m / sigma - log_t + y - e))
    obj = loglik - 0.5 * p_dim * float(beta @ pen_mat @ beta)
    one_m_e = 1.0 - e
    g_beta = design.T @ one_m_e - p_dim * (pen_mat @ beta)
    g_phi = float(np.sum(one_m_e)) / sigma
    g_s = float(np.sum(-1.0 - (m / sigma) * one_m_e))
    grad = np.concatenate([g_beta, [g_phi, g_s]])

    n_par = len(theta)
    hess = np.zeros((n_par, n_par))
    hess[:-2, :-2] = -(design.T * e) @ design - p_dim * pen_mat
    h_beta_phi = -(design.T @ e) / sigma
    h_beta_s = design.T @ (e * m) / sigma
    hess[:-2, -2] = hess[-2, :-2] = h_beta_phi
    hess[:-2, -1] = hess[-1, :-2] = h_beta_s
    hess[-2, -2] = -float(np.sum(e)) / sigma**2
    h_phi_s = float(np.sum(e * m / sigma**2 - one_m_e / sigma))
    hess[-2, -1] = hess[-1, -2] = h_phi_s
    hess[-1, -1] = float(np.sum((m / sigma) * one_m_e - e * (m / sigma) ** 2))
    return obj, grad, hess


def pml_objective_gradient(design, responses, family, penalty, a0, theta):
    """Objective and gradient of the penalized log-likelihood at ``theta``
    (beta for logit; (beta, phi, log sigma) for the hazard model)."""
    p_dim = design.shape[1]
    pen_mat = penalty_matrix(design, penalty, a0)
    family = Family(family)
    if family is Family.LOGIT:
        obj, grad, _ = _logit_parts(design, responses, np.asarray(theta), pen_mat, p_dim)
    else:
        obj, grad, _ = _weibull_parts(design, responses, np.asarray(theta), pen_mat, p_dim)
    return obj, grad


def fit_pml(design, responses, family, spec, penalty, controls=None):
    """Fit the penalized ML estimator on one data set.

    Parameters
    ----------
    design : (n, p) array
    responses : (n,) labels in {-1, +1} (logit) or positive times (hazard)
    family : Family
    spec : PopulationSpec (supplies A0 for the oracle penalty)
    penalty : PenaltyConfig
    """
    controls = controls or FitControls()
    family = Family(family)
    design = np.asarray(design, dtype=float)
    responses = np.asarray(responses, dtype=float)
    n, p_dim = design.shape
    pen_mat = penalty_matrix(design, penalty, spec.a0)

    if family is Family.LOGIT:
        theta = np.zeros(p_dim)
        parts = lambda th: _logit_parts(design, responses, th, pen_mat, p_dim)
    else:
        theta = np.concatenate([np.zeros(p_dim),
                                [-np.log(float(np.mean(responses))), 0.0]])
        parts = lambda th: _weibull_parts(design, responses, th, pen_mat, p_dim)

    obj, grad, hess = parts(theta)
    if grad is None or not np.isfinite(obj):
        raise ValueError("objective not finite at the initial point")
    converged = False
    it = 0
    for it in range(1, controls.max_iter + 1):
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= controls.gradient_tol * max(1.0, abs(obj)):
            converged = True
            break
        direction = _ascent_direction(hess, grad)
        # Armijo backtracking on the concave objective
        slope = float(grad @ direction)
        step = 1.0
        for _ in range(controls.max_backtracks):
            cand = theta + step * direction
            obj_c, grad_c, hess_c = parts(cand)
            if np.isfinite(obj_c) and obj_c >= obj + ARMIJO_SLOPE * step * slope:
                break
            step *= ARMIJO_FACTOR
        else:
            break  # line search failed; report non-convergence
        theta, obj, grad, hess = cand, obj_c, grad_c, hess_c

    gnorm = float(np.linalg.norm(grad))
    converged = converged or gnorm <= controls.gradient_tol * max(1.0, abs(obj))
    if family is Family.LOGIT:
        beta_hat, nuis = theta, None
    else:
        beta_hat = theta[:-2]
        nuis = NuisanceParams(phi=float(theta[-2]), sigma=float(np.exp(theta[-1])))
    return FitResult(beta_hat=beta_hat, nuisance_hat=nuis, objective=obj,
                     gradient_norm=gnorm, converged=converged, iterations=it)


def _ascent_direction(hess, grad):
    """Newton direction with Levenberg damping when -H is not positive
    definite or the direction fails to be an ascent direction."""
    neg_h = -hess
    lam = 0.0
    scale = float(np.mean(np.diag(neg_h))) or 1.0
    for _ in range(30):
        try:
            d = np.linalg.solve(neg_h + lam * np.eye(neg_h.shape[0]), grad)
        except np.linalg.LinAlgError:
            d = None
        if d is not None and float(grad @ d) > 0 and np.all(np.isfinite(d)):
            return d
        lam = max(1e-8 * scale, 10.0 * lam if lam else 1e-6 * scale)
    return grad  # last resort: gradient ascent step


def compute_overlaps(fit, spec, replicate_id=0):
    """Signal inflation K_n and orthogonal error amplitude V_n.

    K_n = (beta_hat . beta0) / ||beta0||^2 and
    V_n = ||(I - beta0 beta0^T / ||beta0||^2) beta_hat|| / alpha with
    alpha = sqrt(tr(A0^{-1}) / p).
    """
    if spec.alpha2 <= 0:
        raise ValueError("population alpha2 must be positive")
    b0 = spec.beta0
    norm0_sq = float(b0 @ b0)
    if norm0_sq == 0:
        raise ValueError("true coefficient vector must be nonzero")
    k_n = float(fit.beta_hat @ b0) / norm0_sq
    perp = fit.beta_hat - k_n * b0
    v_n = float(np.linalg.norm(perp)) / np.sqrt(spec.alpha2)
    return OverlapSample(k_n=k_n, v_n=v_n, replicate_id=replicate_id)


def corrected_nuisance(fit, factors):
    """Invert the asymptotic nuisance bias: with (h, g) the predicted
    offsets, sigma_c = sigma_hat / g and phi_c = phi_hat - sigma_c * h."""
    h, g = factors
    if g <= 0:
        raise ValueError("debias factor g must be positive")
    sigma_c = fit.nuisance_hat.sigma / g
    phi_c = fit.nuisance_hat.phi - sigma_c * h
    return NuisanceParams(phi=phi_c, sigma=sigma_c)
