"""Command-line interface.

Subcommands
-----------
solve      one asymptotic solve at fixed dimension ratio, JSON output
zero-bias  unbiasing penalty strengths over a ratio grid
curves     theory curves (K, v, nuisance offsets) over a ratio grid
simulate   run a replicated experiment from a JSON config file
compare    deviation report for a simulation summary

Exit codes: 0 success, 1 solver non-convergence, 2 invalid usage/config.
"""

import argparse
import json
import sys

from .harness import (
    ConfigError,
    ExperimentConfig,
    compare_report,
    report_to_csv,
    run_experiment,
    summary_to_csv,
)
from .solver import (
    BracketError,
    ConvergenceError,
    DegenerateRegimeError,
    PenaltyConfig,
    SolverControls,
    asymptotic_moments,
    rs_solve_logit,
    rs_solve_weibull,
    zero_bias_logit,
    zero_bias_weibull,
)

EXIT_OK = 0
EXIT_NOCONV = 1
EXIT_USAGE = 2


def parse_zeta_grid(text):
    """'0.3', '0.1,0.2,0.4' or 'start:stop:step' (inclusive stop)."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("grid syntax is start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError("grid needs step > 0 and stop >= start")
        out = []
        k = 0
        while True:
            z = start + k * step
            if z > stop + 1e-12:
                break
            out.append(round(z, 12))
            k += 1
        return out
    return [float(p) for p in text.split(",") if p]


def _controls(args):
    return SolverControls(tolerance=args.tol, order=args.order)


def _write(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _add_common(parser, model=True, grid=False):
    if model:
        parser.add_argument("--model", choices=("logit", "weibull"), required=True)
    parser.add_argument("--S", type=float, default=1.0, help="signal strength")
    parser.add_argument("--order", type=int, default=40, help="quadrature order")
    parser.add_argument("--tol", type=float, default=1e-10,
                        help="fixed-point tolerance")
    parser.add_argument("--out", default=None, help="output path (default stdout)")
    if grid:
        parser.add_argument("--zeta", required=True,
                            help="ratio grid: value, list or start:stop:step")
        parser.add_argument("--format", choices=("json", "csv"), default="json")


def cmd_solve(args):
    penalty = PenaltyConfig(eta_prime=args.eta_prime, tau_prime=args.tau_prime)
    controls = _controls(args)
    if args.model == "logit":
        sol = rs_solve_logit(args.S, penalty, zeta=args.zeta, controls=controls)
    else:
        sol = rs_solve_weibull(args.S, penalty, zeta=args.zeta, controls=controls)
    payload = sol.to_dict()
    bias2, variance, mse = asymptotic_moments(sol, args.S0, args.alpha2)
    payload["moments"] = {"S0": args.S0, "alpha2": args.alpha2, "bias2": bias2,
                          "variance": variance, "mse": mse}
    _write(json.dumps(payload, indent=2) + "\n", args.out)
    return EXIT_OK if sol.converged else EXIT_NOCONV


def _zero_bias(model, S, zeta, mode, controls):
    fn = zero_bias_logit if model == "logit" else zero_bias_weibull
    return fn(S, zeta, mode, controls)


def cmd_zero_bias(args):
    grid = parse_zeta_grid(args.zeta)
    modes = ("oracle", "empirical") if args.mode == "both" else (args.mode,)
    controls = _controls(args)
    rows = []
    for zeta in grid:
        row = {"zeta": zeta}
        for mode in modes:
            value, sol = _zero_bias(args.model, args.S, zeta, mode, controls)
            key = "eta_star" if mode == "oracle" else "tau_star"
            row[key] = value
            row[f"{key}_v"] = sol.state.v
            row[f"{key}_k"] = sol.state.w / sol.S
        rows.append(row)
    if args.format == "csv":
        cols = list(rows[0])
        lines = [",".join(cols)]
        lines += [",".join(repr(r[c]) if isinstance(r[c], float) else str(r[c])
                           for c in cols) for r in rows]
        _write("\n".join(lines) + "\n", args.out)
    else:
        _write(json.dumps({"model": args.model, "S": args.S, "rows": rows},
                          indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_curves(args):
    grid = parse_zeta_grid(args.zeta)
    penalty = PenaltyConfig(eta_prime=args.eta_prime, tau_prime=args.tau_prime)
    controls = _controls(args)
    rows = []
    for zeta in grid:
        if args.model == "logit":
            sol = rs_solve_logit(args.S, penalty, zeta=zeta, controls=controls)
        else:
            sol = rs_solve_weibull(args.S, penalty, zeta=zeta, controls=controls)
        if not sol.converged:
            print(f"solver did not converge at zeta={zeta}", file=sys.stderr)
            return EXIT_NOCONV
        row = {"zeta": zeta, "K": sol.k_prediction, "v": sol.v_prediction,
               "u2": sol.state.u2, "mu2": sol.state.mu2}
        if args.model == "weibull":
            row["h"] = sol.state.nuisance.phi
            row["g"] = sol.state.nuisance.sigma
        rows.append(row)
    if args.format == "csv":
        cols = list(rows[0])
        lines = [",".join(cols)]
        lines += [",".join(repr(r[c]) if isinstance(r[c], float) else str(r[c])
                           for c in cols) for r in rows]
        _write("\n".join(lines) + "\n", args.out)
    else:
        _write(json.dumps({"model": args.model, "S": args.S,
                           "eta_prime": args.eta_prime,
                           "tau_prime": args.tau_prime, "rows": rows},
                          indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_simulate(args):
    with open(args.config) as fh:
        raw = json.load(fh)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.replicates is not None:
        raw["replicates"] = args.replicates
    config = ExperimentConfig.from_dict(raw)
    summary = run_experiment(config)
    if args.format == "csv":
        _write(summary_to_csv(summary), args.out)
    else:
        _write(json.dumps(summary, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_compare(args):
    with open(args.input) as fh:
        summary = json.load(fh)
    tolerances = json.loads(args.tolerances) if args.tolerances else None
    report = compare_report(summary, tolerances)
    if args.format == "csv":
        _write(report_to_csv(report), args.out)
    else:
        _write(json.dumps(report, indent=2) + "\n", args.out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rs-cavity",
        description="Asymptotics of covariantly penalized GLM estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="one solve at fixed dimension ratio")
    _add_common(p_solve)
    p_solve.add_argument("--zeta", type=float, required=True)
    p_solve.add_argument("--eta-prime", type=float, default=0.0)
    p_solve.add_argument("--tau-prime", type=float, default=0.0)
    p_solve.add_argument("--S0", type=float, default=1.0,
                         help="norm of the true coefficient vector")
    p_solve.add_argument("--alpha2", type=float, default=1.0,
                         help="tr(A0^-1)/p of the population")
    p_solve.set_defaults(func=cmd_solve)

    p_zb = sub.add_parser("zero-bias", help="unbiasing penalties over a grid")
    _add_common(p_zb, grid=True)
    p_zb.add_argument("--mode", choices=("oracle", "empirical", "both"),
                      default="both")
    p_zb.set_defaults(func=cmd_zero_bias)

    p_curves = sub.add_parser("curves", help="theory curves over a grid")
    _add_common(p_curves, grid=True)
    p_curves.add_argument("--eta-prime", type=float, default=0.0)
    p_curves.add_argument("--tau-prime", type=float, default=0.0)
    p_curves.set_defaults(func=cmd_curves)

    p_sim = sub.add_parser("simulate", help="replicated experiment from config")
    p_sim.add_argument("--config", required=True, help="JSON config path")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--replicates", type=int, default=None)
    p_sim.add_argument("--format", choices=("json", "csv"), default="json")
    p_sim.add_argument("--out", default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_cmp = sub.add_parser("compare", help="deviation report for a summary")
    p_cmp.add_argument("--input", required=True, help="simulation summary JSON")
    p_cmp.add_argument("--tolerances", default=None,
                       help='JSON dict of per-stat tolerances, e.g. {"K_n": 0.03}')
    p_cmp.add_argument("--format", choices=("json", "csv"), default="json")
    p_cmp.add_argument("--out", default=None)
    p_cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BracketError, ConvergenceError) as exc:
        print(f"solver failed to converge: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except (ConfigError, DegenerateRegimeError, ValueError, OSError,
            json.JSONDecodeError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
