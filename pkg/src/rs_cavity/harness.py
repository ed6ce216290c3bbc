"""Replicated simulation experiments with attached theory predictions.

An experiment sweeps a grid of dimension ratios; at each ratio it draws
``replicates`` independent data sets (fresh population covariance per
replicate unless frozen), fits the penalized ML estimator, computes the
overlap statistics and aggregates mean and quartiles next to the solved
asymptotic predictions.

Reproducibility: every random stream is derived from the experiment seed
via ``np.random.SeedSequence(seed, spawn_key=(zeta_index, replicate))``,
so results are independent of execution order and worker count.  The
``RS_CAVITY_THREADS`` environment variable caps the worker count
(unset/1 = sequential, 0 = one per CPU).
"""

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .estimator import FitControls, compute_overlaps, corrected_nuisance, fit_pml
from .kernels import Family, NuisanceParams, sample_logit, sample_weibull
from .population import DEFAULT_EIG_SUPPORT, build_population, sample_covariates
from .solver import (
    PenaltyConfig,
    SolverControls,
    debias_factors_from_solution,
    rs_solve_logit,
    rs_solve_weibull,
    zero_bias_logit,
    zero_bias_weibull,
)

PENALTY_MODES = ("none", "oracle", "empirical", "zero_bias_oracle",
                 "zero_bias_empirical")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    family: str = "logit"
    n: int = 200
    zeta_grid: tuple = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6)
    S_target: float = 1.0
    penalty_mode: str = "none"
    penalty_value: float = None
    replicates: int = 500
    seed: int = 0
    quadrature_order: int = 40
    tolerance: float = 1e-10
    eig_support: tuple = DEFAULT_EIG_SUPPORT
    freeze_population: bool = False
    phi0: float = 0.0
    sigma0: float = 1.0

    def __post_init__(self):
        if self.family not in ("logit", "weibull"):
            raise ConfigError(f"unknown family {self.family!r}")
        if self.penalty_mode not in PENALTY_MODES:
            raise ConfigError(f"unknown penalty mode {self.penalty_mode!r}")
        if self.penalty_mode in ("oracle", "empirical") and self.penalty_value is None:
            raise ConfigError(f"penalty mode {self.penalty_mode!r} needs penalty_value")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not self.zeta_grid or any(z <= 0 for z in self.zeta_grid):
            raise ConfigError("zeta grid values must be positive")
        if any(round(self.n * z) < 1 for z in self.zeta_grid):
            raise ConfigError("n * zeta must round to a dimension >= 1")
        if self.sigma0 <= 0:
            raise ConfigError("sigma0 must be positive")

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        d = dict(d)
        for key in ("zeta_grid", "eig_support"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["zeta_grid"] = list(self.zeta_grid)
        d["eig_support"] = list(self.eig_support)
        return d

    def digest(self):
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def _solve_theory(config, zeta_eff):
    """RS solution and penalty for one grid point."""
    controls = SolverControls(tolerance=config.tolerance,
                              order=config.quadrature_order)
    mode = config.penalty_mode
    if config.family == "logit":
        if mode == "zero_bias_oracle":
            value, sol = zero_bias_logit(config.S_target, zeta_eff, "oracle", controls)
            return sol.penalty, sol
        if mode == "zero_bias_empirical":
            value, sol = zero_bias_logit(config.S_target, zeta_eff, "empirical", controls)
            return sol.penalty, sol
        penalty = _explicit_penalty(config)
        return penalty, rs_solve_logit(config.S_target, penalty, zeta=zeta_eff,
                                       controls=controls)
    if mode == "zero_bias_oracle":
        value, sol = zero_bias_weibull(config.S_target, zeta_eff, "oracle", controls)
        return sol.penalty, sol
    if mode == "zero_bias_empirical":
        value, sol = zero_bias_weibull(config.S_target, zeta_eff, "empirical", controls)
        return sol.penalty, sol
    penalty = _explicit_penalty(config)
    return penalty, rs_solve_weibull(config.S_target, penalty, zeta=zeta_eff,
                                     controls=controls)


def _explicit_penalty(config):
    if config.penalty_mode == "none":
        return PenaltyConfig()
    if config.penalty_mode == "oracle":
        return PenaltyConfig(eta_prime=config.penalty_value)
    return PenaltyConfig(tau_prime=config.penalty_value)


def _run_replicate(config, zeta_index, replicate, p_dim, penalty, debias):
    """One synthetic data set: population, sample, fit, statistics."""
    seq = np.random.SeedSequence(config.seed, spawn_key=(zeta_index, replicate))
    rng = np.random.default_rng(seq)
    if config.freeze_population:
        pop_rng = np.random.default_rng(
            np.random.SeedSequence(config.seed, spawn_key=(zeta_index, 1 << 30)))
    else:
        pop_rng = rng
    spec = build_population(p_dim, pop_rng, eig_support=config.eig_support,
                            s_target=config.S_target)
    design = sample_covariates(config.n, spec, rng)
    y = design @ spec.beta0
    if config.family == "logit":
        responses = sample_logit(y, rng)
        family = Family.LOGIT
    else:
        responses = sample_weibull(y, config.phi0, config.sigma0, rng)
        family = Family.WEIBULL_PH
    fit = fit_pml(design, responses, family, spec, penalty, FitControls())
    row = {"replicate": replicate, "converged": bool(fit.converged),
           "alpha2": spec.alpha2}
    if not fit.converged:
        return row
    ov = compute_overlaps(fit, spec, replicate_id=replicate)
    row["K_n"] = ov.k_n
    row["V_n"] = ov.v_n
    row["mse_beta"] = float(np.sum((fit.beta_hat - spec.beta0) ** 2))
    if config.family == "weibull":
        row["sigma_ratio"] = fit.nuisance_hat.sigma / config.sigma0
        row["phi_shift"] = (fit.nuisance_hat.phi - config.phi0) / config.sigma0
        corr = corrected_nuisance(fit, debias)
        row["sigma_ratio_corrected"] = corr.sigma / config.sigma0
        row["phi_shift_corrected"] = (corr.phi - config.phi0) / config.sigma0
    return row


def _worker_count():
    raw = os.environ.get("RS_CAVITY_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"RS_CAVITY_THREADS must be an integer, got {raw!r}")
    if value == 0:
        return os.cpu_count() or 1
    return max(1, value)


_STATS_LOGIT = ("K_n", "V_n", "mse_beta")
_STATS_WEIBULL = _STATS_LOGIT + ("sigma_ratio", "phi_shift",
                                 "sigma_ratio_corrected", "phi_shift_corrected")


def run_experiment(config):
    """Run the full sweep and return the summary dictionary."""
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    rows = []
    for zeta_index, zeta in enumerate(config.zeta_grid):
        p_dim = round(config.n * zeta)
        zeta_eff = p_dim / config.n
        penalty, rs_sol = _solve_theory(config, zeta_eff)
        if not rs_sol.converged:
            raise RuntimeError(
                f"theory solve failed at zeta={zeta}: {rs_sol.warnings}")
        debias = (debias_factors_from_solution(rs_sol)
                  if config.family == "weibull" else None)
        tasks = [(config, zeta_index, rep, p_dim, penalty, debias)
                 for rep in range(config.replicates)]
        workers = _worker_count()
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                reps = list(pool.map(_run_replicate_star, tasks, chunksize=8))
        else:
            reps = [_run_replicate(*t) for t in tasks]
        reps.sort(key=lambda r: r["replicate"])
        rows.append(_aggregate(config, zeta, zeta_eff, penalty, rs_sol, reps))
    return {
        "config": config.to_dict(),
        "config_digest": config.digest(),
        "rows": rows,
    }


def _run_replicate_star(args):
    return _run_replicate(*args)


def _aggregate(config, zeta, zeta_eff, penalty, rs_sol, reps):
    ok = [r for r in reps if r["converged"]]
    n_fail = len(reps) - len(ok)
    mean_alpha2 = float(np.mean([r["alpha2"] for r in reps]))
    bias2 = (rs_sol.k_prediction - 1.0) ** 2  # S0 = 1 by construction
    predictions = {
        "K_n": rs_sol.k_prediction,
        "V_n": rs_sol.v_prediction,
        "mse_beta": rs_sol.v_prediction**2 * mean_alpha2 + bias2,
    }
    if config.family == "weibull":
        h, g = debias_factors_from_solution(rs_sol)
        predictions.update({"sigma_ratio": g, "phi_shift": h,
                            "sigma_ratio_corrected": 1.0,
                            "phi_shift_corrected": 0.0})
    stats = _STATS_LOGIT if config.family == "logit" else _STATS_WEIBULL
    stat_rows = {}
    for stat in stats:
        vals = np.array([r[stat] for r in ok]) if ok else np.array([])
        if vals.size:
            entry = {
                "mean": float(np.mean(vals)),
                "q1": float(np.percentile(vals, 25)),
                "q3": float(np.percentile(vals, 75)),
                "median": float(np.median(vals)),
            }
        else:
            entry = {"mean": None, "q1": None, "q3": None, "median": None}
        entry["rs_prediction"] = predictions[stat]
        entry["deviation"] = (entry["mean"] - predictions[stat]
                              if entry["mean"] is not None else None)
        stat_rows[stat] = entry
    return {
        "zeta": zeta,
        "zeta_effective": zeta_eff,
        "p": round(config.n * zeta),
        "eta_prime": penalty.eta_prime,
        "tau_prime": penalty.tau_prime,
        "replicates": len(reps),
        "n_fail": n_fail,
        "mean_alpha2": mean_alpha2,
        "rs_solution": rs_sol.to_dict(),
        "stats": stat_rows,
    }


DEFAULT_TOLERANCES = {"K_n": 0.03}


def compare_report(summary, tolerances=None):
    """Deviation report: per (zeta, stat) the mean-vs-prediction gap,
    interquartile width and a pass flag against configured tolerances."""
    tolerances = DEFAULT_TOLERANCES if tolerances is None else tolerances
    report_rows = []
    for row in summary["rows"]:
        for stat, entry in row["stats"].items():
            tol = tolerances.get(stat)
            dev = entry["deviation"]
            passed = None
            if tol is not None and dev is not None:
                passed = bool(abs(dev) <= tol)
            iqr = (entry["q3"] - entry["q1"]
                   if entry["q1"] is not None else None)
            report_rows.append({
                "zeta": row["zeta"],
                "zeta_effective": row["zeta_effective"],
                "stat": stat,
                "mean": entry["mean"],
                "q1": entry["q1"],
                "q3": entry["q3"],
                "rs_prediction": entry["rs_prediction"],
                "deviation": dev,
                "iqr_width": iqr,
                "tolerance": tol,
                "passed": passed,
                "n_fail": row["n_fail"],
            })
    n_passed = sum(1 for r in report_rows if r["passed"] is True)
    n_failed = sum(1 for r in report_rows if r["passed"] is False)
    return {
        "config_digest": summary["config_digest"],
        "rows": report_rows,
        "totals": {"rows": len(report_rows), "passed": n_passed,
                   "failed": n_failed},
    }


CSV_HEADER = "zeta,zeta_effective,stat,mean,q1,q3,rs_prediction,deviation,n_fail"


def summary_to_csv(summary):
    """One CSV row per (zeta, statistic)."""
    lines = [CSV_HEADER]
    for row in summary["rows"]:
        for stat, entry in row["stats"].items():
            fields = [row["zeta"], row["zeta_effective"], stat,
                      entry["mean"], entry["q1"], entry["q3"],
                      entry["rs_prediction"], entry["deviation"], row["n_fail"]]
            lines.append(",".join("" if f is None else repr(f) if isinstance(f, float) else str(f)
                                  for f in fields))
    return "\n".join(lines) + "\n"


def report_to_csv(report):
    header = ("zeta,zeta_effective,stat,mean,q1,q3,rs_prediction,deviation,"
              "iqr_width,tolerance,passed,n_fail")
    lines = [header]
    for r in report["rows"]:
        fields = [r["zeta"], r["zeta_effective"], r["stat"], r["mean"], r["q1"],
                  r["q3"], r["rs_prediction"], r["deviation"], r["iqr_width"],
                  r["tolerance"], r["passed"], r["n_fail"]]
        lines.append(",".join("" if f is None else repr(f) if isinstance(f, float) else str(f)
                              for f in fields))
    return "\n".join(lines) + "\n"
