"""Fixed-point solvers for the asymptotic order-parameter systems.

The systems describe the high-dimensional limit of covariantly penalized
maximum-likelihood estimation.  For both model families the unknowns are
the dimension ratio ``zeta`` and the scaled order parameters
``(nu, omega)`` (plus ``(mu, sigma/sigma0)`` for the hazard model), related
to the raw parameters (u^2, v, w) by

    mu^2 = u^2 / (1 + tau' zeta u^2),   nu = v / (1 + tau' zeta u^2),
    omega = w / (1 + tau' zeta u^2).

Writing c = tau' * zeta * mu^2, the inverse map is u^2 = mu^2 / (1 - c) and
likewise for (v, w).  The natural iteration takes the cavity strength
(``mu2`` for logit, the nuisance shift ``phi_shift`` for the hazard model)
as input and produces ``zeta`` as an output; solving for a prescribed
``zeta`` wraps the iteration in a bracketed scalar root find over that
input, which preserves the inner mapping unchanged.
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .backend import lambert_from_log_grid, tanh_prox_grid
from .kernels import Family, NuisanceParams
from .quadrature import make_logit_rules, make_weibull_rules


class ConvergenceError(RuntimeError):
    """An inner solve that must succeed did not."""


class BracketError(ConvergenceError):
    """No sign-changing bracket found for the requested dimension ratio."""


class DegenerateRegimeError(RuntimeError):
    """The requested regime admits no physical solution (e.g. 1-chi <= 0)."""


@dataclass(frozen=True)
class PenaltyConfig:
    """Strengths of the two quadratic penalties: ``eta_prime`` multiplies the
    population covariance, ``tau_prime`` the sample Gram matrix."""

    eta_prime: float = 0.0
    tau_prime: float = 0.0

    def __post_init__(self):
        if self.eta_prime < 0 or self.tau_prime < 0:
            raise ValueError("penalty strengths must be nonnegative")


@dataclass(frozen=True)
class SolverControls:
    tolerance: float = 1e-10
    max_iter: int = 10_000
    damping: float = 0.5
    damping_off_residual: float = 1e-6
    order: int = 40
    zeta_tol: float = 1e-8
    init: tuple = None
    sigma_ratio_bounds: tuple = (0.02, 50.0)


@dataclass(frozen=True)
class RSState:
    """Order parameters at a fixed point, in both parametrizations."""

    zeta: float
    u2: float
    v: float
    w: float
    mu2: float
    nu: float
    omega: float
    nuisance: NuisanceParams = None
    phi_shift: float = None

    @classmethod
    def from_scaled(cls, zeta, mu2, nu, omega, tau_prime, nuisance=None,
                    phi_shift=None):
        c = tau_prime * zeta * mu2
        if not c < 1.0:
            raise ValueError("transformation requires 1 - tau' zeta mu^2 > 0")
        inv = 1.0 / (1.0 - c)
        return cls(
            zeta=zeta, u2=mu2 * inv, v=nu * inv, w=omega * inv,
            mu2=mu2, nu=nu, omega=omega, nuisance=nuisance,
            phi_shift=phi_shift,
        )


@dataclass
class RSSolution:
    family: Family
    S: float
    penalty: PenaltyConfig
    state: RSState
    iterations: int
    residual: float
    converged: bool
    order: int
    tolerance: float
    warnings: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def k_prediction(self):
        """Asymptotic signal inflation factor w/S."""
        return self.state.w / self.S

    @property
    def v_prediction(self):
        """Asymptotic error amplitude."""
        return self.state.v

    def to_dict(self):
        out = {
            "family": self.family.value,
            "S": self.S,
            "eta_prime": self.penalty.eta_prime,
            "tau_prime": self.penalty.tau_prime,
            "order": self.order,
            "tolerance": self.tolerance,
            "state": {
                "zeta": self.state.zeta,
                "u2": self.state.u2,
                "v": self.state.v,
                "w": self.state.w,
                "mu2": self.state.mu2,
                "nu": self.state.nu,
                "omega": self.state.omega,
                "phi_shift": self.state.phi_shift,
            },
            "k_prediction": self.k_prediction,
            "v_prediction": self.v_prediction,
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "warnings": list(self.warnings),
            "diagnostics": dict(self.diagnostics),
        }
        if self.state.nuisance is not None:
            out["state"]["nuisance"] = asdict(self.state.nuisance)
        return out


def asymptotic_moments(sol, s0, alpha2):
    """(squared bias, variance, mse) of the estimator predicted from a
    converged solution, for a population with norm ``s0`` and inverse-trace
    ``alpha2``."""
    bias2 = s0**2 * (sol.state.w / sol.S - 1.0) ** 2
    variance = sol.state.v**2 * alpha2
    return bias2, variance, bias2 + variance


def _solve_zeta_rs2(a, b, m):
    """Dimension ratio implied by the susceptibility equation.

    Solves zeta * (1 - b / (1 - a*zeta)) = 1 - (1 - a*zeta) * (1 - m) for
    zeta, with a = tau'*mu^2, b = eta'*mu^2 and m the u^2/(u^2+...) type
    expectation.  Reduces to zeta = m / (1 - b) without the empirical
    penalty; otherwise the smaller positive root of a quadratic (the other
    root diverges as a -> 0) keeps 1 - a*zeta > 0.
    """
    if m <= 0:
        raise ConvergenceError(f"susceptibility expectation must be positive, got {m}")
    if a == 0.0:
        if b >= 1.0:
            raise DegenerateRegimeError("eta' mu^2 >= 1 leaves no positive ratio")
        return m / (1.0 - b)
    qa = a * (a * (1.0 - m) - 1.0)
    qb = 1.0 - b + a * (2.0 * m - 1.0)
    qc = -m
    disc = qb * qb - 4.0 * qa * qc
    if disc < 0:
        raise ConvergenceError("no real root for the dimension-ratio equation")
    roots = sorted(((-qb + math.sqrt(disc)) / (2.0 * qa),
                    (-qb - math.sqrt(disc)) / (2.0 * qa)))
    for r in roots:
        if r > 0.0 and a * r < 1.0:
            return r
    raise ConvergenceError(f"no physical dimension-ratio root among {roots}")


def _sech2(x):
    e = np.exp(-np.abs(x))
    s = 2.0 * e / (1.0 + e * e)
    return s * s


# ---------------------------------------------------------------------------
# Logit system
# ---------------------------------------------------------------------------


class _LogitSystem:
    """Quadrature grids and expectations for the binary-response system."""

    def __init__(self, S, penalty, order):
        self.S = S
        self.penalty = penalty
        self.order = order
        rule_q, rule_z0 = make_logit_rules(order)
        t = np.array([-1.0, 1.0]).reshape(2, 1, 1)
        q = rule_q.nodes.reshape(1, -1, 1)
        z0 = rule_z0.nodes.reshape(1, 1, -1)
        p_t = 0.5 * (1.0 + t * np.tanh(S * z0))
        self.t, self.q, self.z0 = t, q, z0
        self.wt = (p_t * rule_q.weights.reshape(1, -1, 1)
                   * rule_z0.weights.reshape(1, 1, -1))
        self.tanh_sz0 = np.tanh(S * z0)
        self._xs = None  # warm start across sweeps

    def expectations(self, zeta, nu, omega, mu2):
        tau = self.penalty.tau_prime
        s = nu * self.q + omega * self.z0
        a = s + mu2 * self.t
        xs = tanh_prox_grid(a, mu2, self._xs)
        self._xs = xs
        r = mu2 * _sech2(xs)
        chi = float(np.sum(self.wt * (r / (1.0 + r))))
        c_old = tau * zeta * mu2
        k = tau * zeta / (1.0 - c_old)
        e1 = float(np.sum(self.wt * (self.t - k * s - np.tanh(xs)) ** 2))
        e3 = float(np.sum(self.wt * xs * (self.t - self.tanh_sz0)))
        return chi, e1, e3

    def step(self, state, mu2):
        zeta, nu, omega = state
        chi, e1, e3 = self.expectations(zeta, nu, omega, mu2)
        eta, tau = self.penalty.eta_prime, self.penalty.tau_prime
        zeta_n = _solve_zeta_rs2(tau * mu2, eta * mu2, chi)
        c = tau * zeta_n * mu2
        nu_n = mu2 * (1.0 - c) * math.sqrt(max(e1, 0.0) / zeta_n)
        omega_n = (1.0 - c) * self.S * e3 / zeta_n
        return np.array([zeta_n, nu_n, omega_n])


def rs_map_logit(x, mu2, S, penalty, order=40):
    """One evaluation of the binary-response fixed-point map on
    x = (zeta, nu, omega) at cavity strength ``mu2``."""
    if mu2 <= 0 or S <= 0:
        raise ValueError("mu2 and S must be positive")
    sys = _LogitSystem(S, penalty, order)
    return tuple(sys.step(np.asarray(x, dtype=float), mu2))


def _iterate(step, x0, controls):
    """Damped fixed-point loop; returns (x, iterations, residual, converged).

    When the step sequence settles into a single geometric mode (successive
    steps nearly parallel with a stable contraction ratio), the remaining
    geometric tail is summed in closed form (Aitken extrapolation along the
    dominant mode).  The extrapolated point is only kept if the next raw
    step confirms it, so the reported residual stays an honest step norm.
    """
    x = np.asarray(x0, dtype=float)
    res = math.inf
    prev_step = None
    cooldown = 0
    for it in range(1, controls.max_iter + 1):
        xn = step(x)
        d = controls.damping if res > controls.damping_off_residual else 1.0
        xn = (1.0 - d) * x + d * xn
        s = xn - x
        res = float(np.linalg.norm(s))
        x = xn
        if res <= controls.tolerance:
            return x, it, res, True
        if prev_step is not None and cooldown == 0 and res > 50 * controls.tolerance:
            prev_norm = float(np.linalg.norm(prev_step))
            if prev_norm > 0:
                rho = res / prev_norm
                cos = float(s @ prev_step) / (res * prev_norm)
                if cos > 0.995 and 0.3 < rho < 0.9995:
                    x = x + s * (rho / (1.0 - rho))
                    prev_step = None
                    cooldown = 2
                    continue
        prev_step = s
        if cooldown:
            cooldown -= 1
    return x, controls.max_iter, res, False


def _logit_init(S, controls):
    return np.array(controls.init) if controls.init else np.array([0.5, 0.5, S / 2.0])


def _warn_empirical(penalty, zeta, warnings):
    if penalty.tau_prime > 0 and zeta >= 0.9:
        warnings.append(
            f"empirical penalty at zeta={zeta:.3g} >= 0.9: sample covariance is "
            "near singular, theory and simulation may diverge"
        )


def rs_solve_logit(S, penalty, mu2=None, zeta=None, controls=None):
    """Solve the binary-response system at fixed ``mu2`` or fixed ``zeta``.

    Exactly one of ``mu2`` and ``zeta`` must be given.  Fixed-``zeta`` mode
    wraps a bracketed scalar root find over ``mu2`` around the same inner
    iteration.
    """
    if S <= 0:
        raise ValueError("S must be positive")
    if (mu2 is None) == (zeta is None):
        raise ValueError("specify exactly one of mu2 or zeta")
    controls = controls or SolverControls()
    sys = _LogitSystem(S, penalty, controls.order)
    if mu2 is not None:
        if mu2 <= 0:
            raise ValueError("mu2 must be positive")
        x, it, res, ok = _iterate(lambda xv: sys.step(xv, mu2), _logit_init(S, controls), controls)
        return _finish_logit(sys, x, mu2, it, res, ok, controls)

    # fixed-zeta mode: root-find over log(mu2)
    carry = {"x": _logit_init(S, controls), "sweeps": 0, "evals": 0}

    def zeta_at(log_mu2, tol_factor=1.0):
        ctl = controls if tol_factor == 1.0 else _loosen(controls, tol_factor)
        m2 = math.exp(log_mu2)
        x, it, res, ok = _iterate(lambda xv: sys.step(xv, m2), carry["x"], ctl)
        carry["x"] = x
        carry["sweeps"] += it
        carry["evals"] += 1
        if not ok:
            raise ConvergenceError(
                f"inner iteration stalled at mu2={m2:.3g} (residual {res:.2e})")
        return x[0]

    log_mu2 = _bracketed_root(zeta_at, zeta, lo=math.log(0.05), hi=math.log(1.0),
                              lo_cap=math.log(1e-8), hi_cap=math.log(1e4))
    m2 = math.exp(log_mu2)
    x, it, res, ok = _iterate(lambda xv: sys.step(xv, m2), carry["x"], controls)
    sol = _finish_logit(sys, x, m2, carry["sweeps"] + it, res, ok, controls)
    sol.diagnostics["outer_evals"] = carry["evals"]
    if ok and abs(x[0] - zeta) > controls.zeta_tol:
        sol.converged = False
        sol.warnings.append(
            f"dimension-ratio target missed: |{x[0]:.10g} - {zeta}| > {controls.zeta_tol}")
    return sol


def _loosen(controls, factor):
    tol = min(1e-6, controls.tolerance * factor)
    return SolverControls(
        tolerance=max(controls.tolerance, tol), max_iter=controls.max_iter,
        damping=controls.damping,
        damping_off_residual=controls.damping_off_residual,
        order=controls.order, zeta_tol=controls.zeta_tol, init=controls.init,
        sigma_ratio_bounds=controls.sigma_ratio_bounds,
    )


def _bracketed_root(f, target, lo, hi, lo_cap, hi_cap, growth=1.0):
    """Find x with f(x) = target; f monotone increasing in practice.

    The bracket is grown geometrically from [lo, hi] using loose inner
    tolerances, then the root is polished with brentq at full tolerance.
    """
    f_lo = f(lo, 1e4) - target
    f_hi = f(hi, 1e4) - target
    steps = 0
    while f_lo > 0 and lo > lo_cap and steps < 200:
        hi, f_hi = lo, f_lo
        lo = max(lo_cap, lo - growth)
        f_lo = f(lo, 1e4) - target
        steps += 1
    while f_hi < 0 and hi < hi_cap and steps < 200:
        lo, f_lo = hi, f_hi
        hi = min(hi_cap, hi + growth)
        f_hi = f(hi, 1e4) - target
        steps += 1
    if f_lo > 0 or f_hi < 0:
        raise BracketError(
            f"no bracket for target dimension ratio {target} "
            f"(f({lo:.3g})={f_lo + target:.4g}, f({hi:.3g})={f_hi + target:.4g})")
    return brentq(lambda u: f(u) - target, lo, hi, xtol=1e-13, rtol=1e-15)


def _finish_logit(sys, x, mu2, iterations, residual, converged, controls):
    zeta, nu, omega = x
    warnings = []
    if not converged:
        warnings.append("max iterations exceeded before reaching tolerance")
    _warn_empirical(sys.penalty, zeta, warnings)
    state = RSState.from_scaled(zeta, mu2, nu, omega, sys.penalty.tau_prime)
    return RSSolution(
        family=Family.LOGIT, S=sys.S, penalty=sys.penalty, state=state,
        iterations=iterations, residual=residual, converged=converged,
        order=controls.order, tolerance=controls.tolerance, warnings=warnings,
    )


def zero_bias_logit(S, zeta, mode, controls=None):
    """Penalty strength making the asymptotic estimator unbiased (w/S = 1).

    ``mode`` is 'oracle' (population penalty, tau'=0) or 'empirical'
    (Gram penalty, eta'=0).  The signal equation is replaced by the
    constraint zeta = E[x*(T - tanh(S Z0))], and the susceptibility
    equation is rearranged into the penalty prescription
    eta* = (zeta - chi) / (mu^2 zeta) or
    tau* = (zeta - chi) / ((1 - chi) mu^2 zeta), with
    chi = E[mu^2 / (mu^2 + cosh^2 x*)].

    Returns ``(penalty_value, RSSolution)``.
    """
    if mode not in ("oracle", "empirical"):
        raise ValueError("mode must be 'oracle' or 'empirical'")
    if S <= 0 or zeta <= 0:
        raise ValueError("S and zeta must be positive")
    controls = controls or SolverControls()
    sys = _LogitSystem(S, PenaltyConfig(), controls.order)

    def step(y):
        nu, omega, mu2, pen = y
        eta, tau = (pen, 0.0) if mode == "oracle" else (0.0, pen)
        sys.penalty = PenaltyConfig(eta_prime=max(eta, 0.0), tau_prime=max(tau, 0.0))
        chi, e1, e3 = sys.expectations(zeta, nu, omega, mu2)
        if e3 <= 0:
            raise ConvergenceError("signal expectation lost positivity")
        mu2_n = mu2 * zeta / e3
        if mode == "oracle":
            pen_n = (zeta - chi) / (mu2 * zeta)
            c = 0.0
        else:
            if 1.0 - chi <= 1e-12:
                raise DegenerateRegimeError("1 - chi <= 0: empirical zero-bias "
                                            "penalty undefined in this regime")
            pen_n = (zeta - chi) / ((1.0 - chi) * mu2 * zeta)
            c = pen_n * zeta * mu2_n
        omega_n = S * (1.0 - c)
        nu_n = mu2_n * (1.0 - c) * math.sqrt(max(e1, 0.0) / zeta)
        return np.array([nu_n, omega_n, mu2_n, pen_n])

    y0 = np.array([0.5, S, 0.5, 0.1])
    y, it, res, ok = _iterate(step, y0, controls)
    nu, omega, mu2, pen = y
    if not ok:
        raise ConvergenceError(
            f"zero-bias iteration did not converge (residual {res:.2e})")
    penalty = (PenaltyConfig(eta_prime=pen) if mode == "oracle"
               else PenaltyConfig(tau_prime=pen))
    warnings = []
    _warn_empirical(penalty, zeta, warnings)
    state = RSState.from_scaled(zeta, mu2, nu, omega, penalty.tau_prime)
    sol = RSSolution(
        family=Family.LOGIT, S=S, penalty=penalty, state=state, iterations=it,
        residual=res, converged=True, order=controls.order,
        tolerance=controls.tolerance, warnings=warnings,
        diagnostics={"mode": mode},
    )
    return pen, sol


# ---------------------------------------------------------------------------
# Weibull proportional-hazards system
# ---------------------------------------------------------------------------


class _WeibullSystem:
    """Grids and expectations for the hazard-model system.

    The inner Lambert-W argument is Z^{sigma0/sigma} mu^2 e^{mu^2 + (omega -
    S sigma0/sigma) Z0 + nu Q + phi_shift}; all evaluation happens on the
    log of that argument, so no exponential is ever formed for nodes where
    it would overflow (the count of such nodes is reported).
    """

    def __init__(self, S, penalty, order):
        self.S = S
        self.penalty = penalty
        self.order = order
        rule_z, rule_q, rule_z0 = make_weibull_rules(order)
        self.logz = np.log(rule_z.nodes).reshape(-1, 1, 1)
        self.q = rule_q.nodes.reshape(1, -1, 1)
        self.z0 = rule_z0.nodes.reshape(1, 1, -1)
        self.wt = (rule_z.weights.reshape(-1, 1, 1)
                   * rule_q.weights.reshape(1, -1, 1)
                   * rule_z0.weights.reshape(1, 1, -1))
        # 2-D grid for the inner mu2 root: nu*Q + (omega - S r)*Z0 collapses
        # to a single Gaussian direction there.
        self.logz2 = np.log(rule_z.nodes).reshape(-1, 1)
        self.y2 = rule_q.nodes.reshape(1, -1)
        self.wt2 = rule_z.weights.reshape(-1, 1) * rule_q.weights.reshape(1, -1)
        self._w3 = None  # warm start for the 3-D Lambert pass
        self._w2 = None
        self.guard_hits = 0

    def _solve_mu2(self, nu, omega, r, phi_shift, mu2_init):
        """Positive root of mu^2 = E[W(...)] at fixed (nu, omega, r, shift).

        Solved on the collapsed 2-D grid by a log-space Newton iteration
        with bisection safeguard.  Raises DegenerateRegimeError when only
        the trivial root exists (E[R] <= 1).
        """
        sy = math.hypot(nu, omega - self.S * r)
        log_r2 = r * self.logz2 + sy * self.y2 + phi_shift
        peak = float(np.max(log_r2))
        log_er = peak + math.log(float(np.sum(self.wt2 * np.exp(log_r2 - peak))))
        if log_er <= 1e-12:
            raise DegenerateRegimeError(
                "E[W-argument factor] <= 1: only the trivial fixed point exists "
                f"at phi_shift={phi_shift:.4g}")
        u = math.log(mu2_init)
        lo, hi = math.log(1e-13), math.log(60.0)
        w2 = self._w2
        for _ in range(80):
            mu2 = math.exp(u)
            w2 = lambert_from_log_grid(u + mu2 + log_r2, w2)
            g = float(np.sum(self.wt2 * w2))
            f_val = math.log(g) - u
            if abs(f_val) <= 1e-13:
                break
            if f_val > 0:
                lo = u
            else:
                hi = u
            dg = float(np.sum(self.wt2 * (w2 / (1.0 + w2)))) * (1.0 + mu2)
            slope = dg / g - 1.0
            un = u - f_val / slope if slope < -1e-12 else 0.5 * (lo + hi)
            if not lo < un < hi:
                un = 0.5 * (lo + hi)
            u = un
        self._w2 = w2
        return math.exp(u)

    def expectations(self, zeta, nu, omega, mu2, sr, phi_shift):
        tau = self.penalty.tau_prime
        r = 1.0 / sr
        log_arg = (r * self.logz + math.log(mu2) + mu2
                   + (omega - self.S * r) * self.z0 + nu * self.q + phi_shift)
        self.guard_hits += int(np.count_nonzero(log_arg > 700.0))
        w = lambert_from_log_grid(log_arg, self._w3)
        self._w3 = w
        s = nu * self.q + omega * self.z0
        c = tau * zeta * mu2
        e1 = float(np.sum(self.wt * (mu2 - w - c / (1.0 - c) * s) ** 2))
        d_exp = float(np.sum(self.wt * (w / (1.0 + w))))
        e4 = float(np.sum(self.wt * w))
        e5 = float(np.sum(self.wt * (self.logz - self.S * self.z0) * (w / mu2 - 1.0)))
        return e1, d_exp, e4, e5

    def step(self, state, phi_shift, controls, implicit_mu2=True):
        zeta, nu, omega, mu, sr = state
        r = 1.0 / sr
        if implicit_mu2:
            mu2 = self._solve_mu2(nu, omega, r, phi_shift, mu * mu)
        else:
            mu2 = mu * mu
        e1, d_exp, e4, e5 = self.expectations(zeta, nu, omega, mu2, sr, phi_shift)
        eta, tau = self.penalty.eta_prime, self.penalty.tau_prime
        zeta_n = _solve_zeta_rs2(tau * mu2, eta * mu2, d_exp)
        mu2_n = mu2 if implicit_mu2 else e4
        lo, hi = controls.sigma_ratio_bounds
        sr_n = min(max(e5, lo), hi)
        c = tau * zeta_n * mu2
        nu_n = (1.0 - c) * math.sqrt(max(e1, 0.0) / zeta_n)
        omega_n = self.S * (1.0 - tau * mu2 - eta * mu2 / (1.0 - c)) / sr_n
        return np.array([zeta_n, nu_n, omega_n, math.sqrt(mu2_n), sr_n])


def rs_map_weibull(x, phi_shift, S, penalty, order=40, controls=None):
    """One plain evaluation of the hazard-model fixed-point map on
    x = (zeta, nu, omega, mu, sigma_ratio) at fixed ``phi_shift``."""
    x = np.asarray(x, dtype=float)
    if x[3] <= 0 or x[4] <= 0:
        raise ValueError("mu and sigma ratio must be positive")
    if S <= 0:
        raise ValueError("S must be positive")
    controls = controls or SolverControls(order=order)
    sys = _WeibullSystem(S, penalty, order)
    return tuple(sys.step(x, phi_shift, controls, implicit_mu2=False))


def _weibull_init(S, controls):
    if controls.init:
        return np.array(controls.init)
    return np.array([0.5, 0.5, S / 2.0, 1.0, 1.0])


def _weibull_fixed_zeta(sys, zeta, controls, carry):
    """Root find over phi_shift so the converged ratio hits ``zeta``.

    ``carry`` persists warm starts (state, shift bracket, sweep counts)
    across calls, which makes repeated solves at nearby penalties cheap.
    """

    def zeta_at(shift, tol_factor=1.0):
        ctl = controls if tol_factor == 1.0 else _loosen(controls, tol_factor)
        try:
            x, it, res, ok = _iterate(
                lambda xv: sys.step(xv, shift, ctl), carry["x"], ctl)
        except DegenerateRegimeError:
            carry["evals"] += 1
            return 0.0  # only the trivial solution: ratio 0 at this shift
        carry["x"] = x
        carry["sweeps"] += it
        carry["evals"] += 1
        if not ok:
            raise ConvergenceError(
                f"inner iteration stalled at phi_shift={shift:.4g} (residual {res:.2e})")
        return x[0]

    lo, hi = carry.get("bracket", (-1.0, 0.5))
    shift = _bracketed_root(zeta_at, zeta, lo=lo, hi=hi, lo_cap=-40.0, hi_cap=40.0)
    carry["bracket"] = (shift - 0.25, shift + 0.25)
    x, it, res, ok = _iterate(
        lambda xv: sys.step(xv, shift, controls), carry["x"], controls)
    carry["x"] = x
    carry["sweeps"] += it
    return x, shift, res, ok


def rs_solve_weibull(S, penalty, phi_shift=None, zeta=None, controls=None):
    """Solve the hazard-model system at fixed ``phi_shift`` or fixed
    ``zeta`` (root find over ``phi_shift``).

    ``phi_shift`` is the scaled nuisance offset (phi - phi0)/sigma held
    fixed by the inner mapping.  The returned state's nuisance carries the
    converged relative values: phi = (phi - phi0)/sigma0 and
    sigma = sigma/sigma0.
    """
    if S <= 0:
        raise ValueError("S must be positive")
    if (phi_shift is None) == (zeta is None):
        raise ValueError("specify exactly one of phi_shift or zeta")
    controls = controls or SolverControls()
    sys = _WeibullSystem(S, penalty, controls.order)
    if phi_shift is not None:
        x, it, res, ok = _iterate(
            lambda xv: sys.step(xv, phi_shift, controls),
            _weibull_init(S, controls), controls)
        return _finish_weibull(sys, x, phi_shift, it, res, ok, controls)

    carry = {"x": _weibull_init(S, controls), "sweeps": 0, "evals": 0}
    x, shift, res, ok = _weibull_fixed_zeta(sys, zeta, controls, carry)
    sol = _finish_weibull(sys, x, shift, carry["sweeps"], res, ok, controls)
    sol.diagnostics["outer_evals"] = carry["evals"]
    if ok and abs(x[0] - zeta) > controls.zeta_tol:
        sol.converged = False
        sol.warnings.append(
            f"dimension-ratio target missed: |{x[0]:.10g} - {zeta}| > {controls.zeta_tol}")
    return sol


def _finish_weibull(sys, x, phi_shift, iterations, residual, converged, controls):
    zeta, nu, omega, mu, sr = x
    warnings = []
    if not converged:
        warnings.append("max iterations exceeded before reaching tolerance")
    lo, hi = controls.sigma_ratio_bounds
    if not lo < sr < hi:
        converged = False
        warnings.append(f"sigma ratio pinned at guard bound {sr:.3g}")
    _warn_empirical(sys.penalty, zeta, warnings)
    nuis = NuisanceParams(phi=phi_shift * sr, sigma=sr)
    state = RSState.from_scaled(zeta, mu * mu, nu, omega, sys.penalty.tau_prime,
                                nuisance=nuis, phi_shift=phi_shift)
    return RSSolution(
        family=Family.WEIBULL_PH, S=sys.S, penalty=sys.penalty, state=state,
        iterations=iterations, residual=residual, converged=converged,
        order=controls.order, tolerance=controls.tolerance, warnings=warnings,
        diagnostics={"overflow_guard_hits": sys.guard_hits},
    )


def zero_bias_weibull(S, zeta, mode, controls=None):
    """Penalty strength giving an unbiased hazard-model estimator (w/S = 1).

    The signal equation is replaced by the constraint w/S = 1 together with
    the prescription eta* = (1 - sigma/sigma0)/mu^2 or
    tau* = (1 - sigma/sigma0) / (mu^2 (1 - zeta sigma/sigma0)); the inner
    fixed point runs at pinned omega = S(1 - tau' zeta mu^2) and an outer
    root find matches the susceptibility equation to the requested zeta.

    Returns ``(penalty_value, RSSolution)``.
    """
    if mode not in ("oracle", "empirical"):
        raise ValueError("mode must be 'oracle' or 'empirical'")
    if S <= 0 or zeta <= 0:
        raise ValueError("S and zeta must be positive")
    controls = controls or SolverControls()
    sys = _WeibullSystem(S, PenaltyConfig(), controls.order)
    carry = {"y": np.array([0.5, 1.0, 1.0, 0.1]), "sweeps": 0, "evals": 0,
             "d_exp": None}

    def inner(shift, ctl):
        def step(y):
            nu, mu, sr, pen = y
            eta, tau = (pen, 0.0) if mode == "oracle" else (0.0, pen)
            sys.penalty = PenaltyConfig(eta_prime=max(eta, 0.0),
                                        tau_prime=max(tau, 0.0))
            # omega pinned by the unbiasedness constraint
            omega = S * (1.0 - tau * zeta * mu * mu)
            mu2 = sys._solve_mu2(nu, omega, 1.0 / sr, shift, mu * mu)
            e1, d_exp, e4, e5 = sys.expectations(zeta, nu, omega, mu2, sr, shift)
            carry["d_exp"] = d_exp
            lo_b, hi_b = ctl.sigma_ratio_bounds
            sr_n = min(max(e5, lo_b), hi_b)
            mu2_n = mu2
            if mode == "oracle":
                pen_n = (1.0 - sr_n) / mu2_n
                c = 0.0
            else:
                if 1.0 - zeta * sr_n <= 1e-10:
                    raise DegenerateRegimeError(
                        "1 - zeta sigma/sigma0 <= 0: empirical zero-bias "
                        "penalty undefined in this regime")
                pen_n = (1.0 - sr_n) / (mu2_n * (1.0 - zeta * sr_n))
                c = pen_n * zeta * mu2_n
            nu_n = (1.0 - c) * math.sqrt(max(e1, 0.0) / zeta)
            return np.array([nu_n, math.sqrt(mu2_n), sr_n, pen_n])

        y, it, res, ok = _iterate(step, carry["y"], ctl)
        carry["y"] = y
        carry["sweeps"] += it
        if not ok:
            raise ConvergenceError(
                f"zero-bias inner iteration stalled (residual {res:.2e})")
        return y, res

    def implied_zeta(shift, tol_factor=1.0):
        ctl = controls if tol_factor == 1.0 else _loosen(controls, tol_factor)
        carry["evals"] += 1
        try:
            y, _ = inner(shift, ctl)
        except DegenerateRegimeError:
            carry["y"] = np.array([0.5, 1.0, 1.0, 0.1])  # drop polluted warm start
            return 0.0  # only the trivial solution at this shift
        nu, mu, sr, pen = y
        eta, tau = (pen, 0.0) if mode == "oracle" else (0.0, pen)
        return _solve_zeta_rs2(tau * mu * mu, eta * mu * mu, carry["d_exp"])

    shift = _bracketed_root(implied_zeta, zeta, lo=-1.0, hi=0.5,
                            lo_cap=-40.0, hi_cap=40.0)
    y, res = inner(shift, controls)
    nu, mu, sr, pen = y
    penalty = (PenaltyConfig(eta_prime=pen) if mode == "oracle"
               else PenaltyConfig(tau_prime=pen))
    c = penalty.tau_prime * zeta * mu * mu
    omega = S * (1.0 - c)
    warnings = []
    _warn_empirical(penalty, zeta, warnings)
    nuis = NuisanceParams(phi=shift * sr, sigma=sr)
    state = RSState.from_scaled(zeta, mu * mu, nu, omega, penalty.tau_prime,
                                nuisance=nuis, phi_shift=shift)
    sol = RSSolution(
        family=Family.WEIBULL_PH, S=S, penalty=penalty, state=state,
        iterations=carry["sweeps"], residual=res, converged=True,
        order=controls.order, tolerance=controls.tolerance, warnings=warnings,
        diagnostics={"mode": mode, "outer_evals": carry["evals"],
                     "overflow_guard_hits": sys.guard_hits},
    )
    return pen, sol


def nuisance_debias_factors(S, zeta, penalty, controls=None):
    """Asymptotic nuisance offsets (h, g) of the hazard model at the given
    penalty: h = (phi_hat - phi0)/sigma0 and g = sigma_hat/sigma0.

    Solves the system at fixed ``zeta``; raises if that solve fails.
    """
    sol = rs_solve_weibull(S, penalty, zeta=zeta, controls=controls)
    if not sol.converged:
        raise ConvergenceError("hazard-model solve did not converge; "
                               f"warnings: {sol.warnings}")
    return debias_factors_from_solution(sol)


def debias_factors_from_solution(sol):
    """(h, g) extracted from a converged hazard-model solution."""
    return sol.state.nuisance.phi, sol.state.nuisance.sigma
