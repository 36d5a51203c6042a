"""Command-line front end.

Exit codes: 0 success (or certified), 1 certification / bound-validity
failure or unwritable output, 2 invalid input.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import asdict
from fractions import Fraction

import numpy as np

from . import __version__
from .certificate import build_certificate
from .lab import FAMILIES, empirical_probe
from .output import dumps_json, format_float, human, sweep_csv
from .pep import build_pep_matrices
from .scalar import ProblemInstance, rate_bound
from .stepsize import DEFAULT_TOL, ConvergenceError, optimal_stepsize, surrogate_class
from .verify import CertifyConfig, certify, oracle_quadratic_identity

EPILOG = """\
gamma is given in absolute units; the normalized stepsize gamma*L is echoed
in every output.  For mu < 0 the max-form columns (branch_mu, bound) of a
sweep are written as the lowercase sentinel `nan`: the max form only holds
for mu >= 0, and only the min form is reported.  Float output uses 17
significant digits (override with the GDPEP_DIGITS environment variable).
"""


class UsageError(Exception):
    pass


def _gamma(text):
    if text in ("opt", "optimal", "star"):
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'opt', got {text!r}")


def _common(p, gamma=True):
    p.add_argument("--N", type=int, required=True, help="number of GD steps (>= 1)")
    p.add_argument("--mu", type=float, required=True, help="strong convexity modulus (< L, may be negative)")
    p.add_argument("--L", type=float, default=1.0, help="smoothness constant (default 1)")
    if gamma:
        p.add_argument("--gamma", type=_gamma, required=True, help="stepsize in (0, 2/L), or 'opt'")
    p.add_argument("--format", choices=("human", "json", "csv"), default="human")
    p.add_argument("--out", help="write to this file instead of stdout")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gdpep",
        description="Exact worst-case rate of gradient descent for |grad f(x_N)|^2 / (f(x_0) - f_*), "
        "with dual certificates and their verification.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", help="print both forms of the worst-case rate", epilog=EPILOG)
    _common(p)

    p = sub.add_parser("optimal-step", help="print the optimal stepsize gamma*", epilog=EPILOG)
    _common(p, gamma=False)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)

    p = sub.add_parser("certify", help="build and verify the dual certificate", epilog=EPILOG)
    _common(p)
    p.add_argument("--arithmetic", choices=("mp", "float", "rational"), default="mp")
    p.add_argument("--dps", type=int, default=CertifyConfig.dps, help="base decimal digits in mp mode")
    p.add_argument("--trials", type=int, default=CertifyConfig.oracle_trials, help="oracle trials")
    p.add_argument("--dim", type=int, default=CertifyConfig.oracle_dim, help="oracle dimension")
    p.add_argument("--seed", type=int, default=CertifyConfig.seed)
    p.add_argument("--psd-tol", type=float, default=CertifyConfig.psd_tol)
    p.add_argument("--tol", type=float, default=None, help="surrogate bisection tolerance")

    p = sub.add_parser("sweep", help="rate over a stepsize grid (CSV)", epilog=EPILOG)
    _common(p, gamma=False)
    p.set_defaults(format="csv")
    p.add_argument("--gamma-min", type=float, required=True)
    p.add_argument("--gamma-max", type=float, required=True)
    p.add_argument("--steps", type=int, required=True, help="number of grid points (>= 0)")

    p = sub.add_parser("simulate", help="probe the bound with random GD runs", epilog=EPILOG)
    _common(p)
    p.add_argument("--family", choices=FAMILIES, default="quadratic")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("oracle", help="randomized check of the quadratic-form identity", epilog=EPILOG)
    _common(p)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--oracle-tol", type=float, default=CertifyConfig.oracle_tol)
    return parser


def _instance(args):
    gamma = args.gamma
    if isinstance(gamma, str):
        gamma = optimal_stepsize(args.N, args.mu, args.L)
    if not all(math.isfinite(v) for v in (args.mu, args.L, gamma)):
        raise UsageError("mu, L and gamma must be finite")
    try:
        return ProblemInstance(args.N, args.mu, args.L, gamma)
    except ValueError as exc:
        raise UsageError(str(exc))


def _echo(inst):
    return {"N": inst.N, "mu": float(inst.mu), "L": float(inst.L), "gamma": float(inst.gamma),
            "gamma_L": float(inst.gamma * inst.L)}


def _f(x):
    return None if x is None else float(x)


def cmd_rate(args):
    inst = _instance(args)
    rb = rate_bound(inst)
    result = dict(_echo(inst), branch_mu=_f(rb.branch_mu), branch_rho=_f(rb.branch_rho),
                  max_value=_f(rb.max_value), min_form=_f(rb.min_form), regime=rb.regime)
    if args.format == "csv":
        bound = rb.max_value
        return sweep_csv([(inst.gamma, rb.branch_mu, rb.branch_rho, bound, rb.min_form, rb.regime)]), 0
    return _render(result, args.format), 0


def cmd_optimal_step(args):
    if not (args.L > 0 and args.mu < args.L) or args.N < 1:
        raise UsageError("need N >= 1, L > 0 and mu < L")
    g = optimal_stepsize(args.N, args.mu, args.L, tol=args.tol)
    result = {"N": args.N, "mu": args.mu, "L": args.L, "gamma_star": g, "gamma_L": g * args.L}
    return _render(result, args.format), 0


def cmd_certify(args):
    inst = _instance(args)
    if args.trials < 0 or args.dim < 1 or args.dps < 5:
        raise UsageError("need trials >= 0, dim >= 1, dps >= 5")
    config = CertifyConfig(arithmetic=args.arithmetic, dps=args.dps, oracle_trials=args.trials,
                           oracle_dim=args.dim, seed=args.seed, psd_tol=args.psd_tol, tol=args.tol)
    if args.arithmetic == "rational":
        inst = ProblemInstance(inst.N, *(_exact(v) for v in (args.mu, args.L, inst.gamma)))
    try:
        report = certify(inst, config)
    except ValueError as exc:
        raise UsageError(str(exc))
    return _render(report.to_dict(), args.format), 0 if report.certified else 1


def _exact(x):
    # decimal literal as typed, e.g. 0.1 -> 1/10
    return Fraction(repr(float(x)))


def cmd_sweep(args):
    if args.steps < 0:
        raise UsageError("--steps must be >= 0")
    if not (args.L > 0 and args.mu < args.L) or args.N < 1:
        raise UsageError("need N >= 1, L > 0 and mu < L")
    gammas = np.linspace(args.gamma_min, args.gamma_max, args.steps) if args.steps else []
    rows = []
    for g in gammas:
        try:
            inst = ProblemInstance(args.N, args.mu, args.L, float(g))
        except ValueError as exc:
            raise UsageError(f"grid point gamma={g}: {exc}")
        rb = rate_bound(inst)
        rows.append((float(g), rb.branch_mu, rb.branch_rho, rb.max_value, rb.min_form, rb.regime))
    if args.format == "csv":
        return sweep_csv(rows), 0
    keys = ("gamma", "branch_mu", "branch_rho", "bound", "min_form", "regime")
    records = [{k: (v if isinstance(v, str) else _f(v)) for k, v in zip(keys, row)} for row in rows]
    if args.format == "json":
        return dumps_json({"N": args.N, "mu": args.mu, "L": args.L, "rows": records}) + "\n", 0
    return "".join(human(r) + "\n" for r in records), 0


def cmd_simulate(args):
    inst = _instance(args)
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    try:
        res = empirical_probe(inst, args.family, args.trials, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc))
    result = dict(_echo(inst), **asdict(res), seed=args.seed)
    return _render(result, args.format), 0 if res.quotient <= 1 + 1e-9 else 1


def cmd_oracle(args):
    inst = _instance(args)
    sur = surrogate_class(inst)
    cert = build_certificate(inst.N, sur.rho_eff, sur.eta_eff, sur.L_eff)
    kappa = (1 - sur.eta_eff) / (1 - sur.rho_eff)
    mats = build_pep_matrices(cert, kappa)
    inst_eff = ProblemInstance(inst.N, sur.mu_eff, sur.L_eff, inst.gamma)
    res = oracle_quadratic_identity(inst_eff, cert, mats.S_sym, args.trials, args.dim, args.seed)
    result = dict(_echo(inst), **asdict(res), passed=res.max_error <= args.oracle_tol)
    return _render(result, args.format), 0 if result["passed"] else 1


def _render(result, fmt):
    if fmt == "json":
        return dumps_json(result) + "\n"
    if fmt == "csv":
        flat = {k: v for k, v in result.items() if not isinstance(v, (dict, list))}
        return ",".join(flat) + "\n" + ",".join(_cell(v) for v in flat.values()) + "\n"
    return human(result)


def _cell(v):
    if v is None:
        return "nan"
    if isinstance(v, (bool, int, str)):
        return str(v)
    return format_float(v)


COMMANDS = {
    "rate": cmd_rate,
    "optimal-step": cmd_optimal_step,
    "certify": cmd_certify,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
}


def write_outputs(text, path=None, stream=None):
    """Write ``text`` to ``path`` (or the stream).  Raises OSError when the path is not writable."""
    if path is None:
        (stream or sys.stdout).write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def run_command(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        text, code = COMMANDS[args.command](args)
    except UsageError as exc:
        stderr.write(f"gdpep {args.command}: error: {exc}\n")
        return 2
    except ConvergenceError as exc:
        stderr.write(f"gdpep {args.command}: solver failure: {exc}\n")
        return 1
    try:
        write_outputs(text, args.out, stdout)
    except OSError as exc:
        stderr.write(f"gdpep {args.command}: cannot write {args.out}: {exc}\n")
        return 1
    return code


def main():
    sys.exit(run_command())
