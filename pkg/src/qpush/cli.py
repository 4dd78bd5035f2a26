"""Experiment runner.

Subcommands::

    qpush run    --problem fig1-num --algo vq --alpha 10 --T 100000
    qpush verify --problem fig1-num --alpha 10 --T 1000 --reference ref.json
    qpush bench  --problem fig1-num --T 10000 --alpha 10 --gamma 0.01
    qpush plot   --trace out/trace.csv

``run`` writes ``trace.csv`` and ``summary.json`` into the output
directory (``--out``, else the ``QPUSH_OUT`` environment variable, else
the working directory), plus an optional full-trace sidecar, bound
margins, and a log-log convergence SVG.  ``verify`` re-runs a problem
and checks the trace against the certified decay bounds from a
reference file ``{"f_star":.., "x_star":[..], "lambda_star":[..],
"beta":..}``; it exits 4 when a bound is violated.  Exit codes: 0 ok,
2 configuration error, 3 numerical failure, 4 bound violation.
"""

import argparse
import json
import os
import sys

import numpy as np

from .baseline import dsg_run
from .errors import ConfigurationError, NonConvergenceError, NumericalDomainError
from .problems import PROBLEM_NAMES, get_problem, half_hop_alpha
from .program import frobenius_bound, load_program, spectral_norm
from .report import (plot_trace, slope_check, write_full_trace_csv,
                     write_summary, write_trace_csv)
from .solver import run, verify_bounds

__all__ = ["main", "run_command", "build_parser"]


def _out_dir(args):
    out = args.out or os.environ.get("QPUSH_OUT") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _load_instance(args):
    if args.problem_file:
        program = load_program(args.problem_file)
        from .problems import ExperimentProblem

        return ExperimentProblem(name=os.path.basename(args.problem_file),
                                 program=program, sense="min", f_star=None,
                                 default_alpha=None)
    if not args.problem:
        raise ConfigurationError("one of --problem or --problem-file is required")
    return _registry_instance(args)


def _registry_instance(args):
    if args.problem not in PROBLEM_NAMES:
        raise ConfigurationError(
            f"unknown problem {args.problem!r}; expected one of {PROBLEM_NAMES}")
    return get_problem(args.problem, seed=getattr(args, "seed", 1))


def _resolve_alpha(args, instance):
    if args.alpha == "auto":
        beta = instance.program.beta_hint
        if beta is None:
            raise ConfigurationError("--alpha auto needs a program with a beta hint")
        return 0.5 * beta * beta + 1.0, "auto"
    try:
        return float(args.alpha), "explicit"
    except ValueError as exc:
        raise ConfigurationError(f"bad --alpha value {args.alpha!r}") from exc


def _resolve_x_init(args, program):
    if args.x_init == "zeros":
        x0 = np.zeros(program.n)
    else:
        with open(args.x_init) as fh:
            x0 = np.asarray(json.load(fh), dtype=float)
    if not program.box.contains(x0):
        raise ConfigurationError("initial point lies outside the box")
    return x0


def _beta_summary(program):
    info = {"beta_hint": program.beta_hint}
    if program.structure == "linear":
        est = spectral_norm(program.A)
        info["beta_spectral"] = est.value
        info["beta_frobenius"] = frobenius_bound(program.A)
    return info


def _execute(args, instance, alpha, alpha_rule):
    program = instance.program
    label = instance.name
    if args.algo == "vq":
        x0 = _resolve_x_init(args, program)
        report = run(program, x0, alpha, args.T, record_every=args.record_every,
                     label=label)
    elif args.algo == "dsg":
        report = dsg_run(program, None, args.gamma, args.T,
                         record_every=args.record_every, label=label)
    else:
        raise ConfigurationError(f"unknown algorithm {args.algo!r}")
    extra = _beta_summary(program)
    extra["sense"] = instance.sense
    extra["objective"] = instance.reported_objective(report.final["f_xbar"])
    if instance.f_star_reported is not None:
        extra["f_star_reference"] = instance.f_star_reported
    if alpha_rule == "auto":
        extra["alpha_rule"] = "auto"
    if instance.topology is not None:
        extra["alpha_half_hop_rule"] = half_hop_alpha(instance.topology)
    return report, extra


def _load_reference(path):
    with open(path) as fh:
        ref = json.load(fh)
    try:
        return (float(ref["f_star"]), np.asarray(ref["x_star"], dtype=float),
                np.asarray(ref["lambda_star"], dtype=float), float(ref["beta"]))
    except KeyError as exc:
        raise ConfigurationError(f"reference file missing field: {exc}") from exc


def _apply_reference(report, reference):
    """Fill the bound-residual trace columns from a reference."""
    f_star, x_star, lambda_star, beta = reference
    bounds = verify_bounds(report, f_star, x_star, lambda_star, beta)
    report.obj_bound_residual = bounds.objective_margin
    report.cons_bound_residual = bounds.constraint_margin
    return bounds


def run_command(args):
    out = _out_dir(args)
    instance = _load_instance(args)
    alpha, alpha_rule = (None, None)
    if args.algo == "vq":
        if args.alpha is None:
            if instance.default_alpha is None:
                raise ConfigurationError("--alpha is required for this problem")
            alpha, alpha_rule = instance.default_alpha, "default"
        else:
            alpha, alpha_rule = _resolve_alpha(args, instance)
    report, extra = _execute(args, instance, alpha, alpha_rule)
    bounds = None
    if args.verify_bounds:
        bounds = _apply_reference(report, _load_reference(args.verify_bounds))
        bounds.to_csv(os.path.join(out, "bounds.csv"))
        extra["bounds"] = bounds.summary()
    trace_path = os.path.join(out, "trace.csv")
    write_trace_csv(report, trace_path)
    if args.full_trace:
        write_full_trace_csv(report, os.path.join(out, "trace_full.csv"))
    summary = write_summary(report, os.path.join(out, "summary.json"), extra=extra)
    if args.plot:
        f_star = instance.f_star
        plot_trace(trace_path, os.path.join(out, "convergence.svg"),
                   f_star=f_star, title=instance.name)
    print(f"wrote {trace_path}")
    print(f"final objective {summary['objective'] if 'objective' in summary else summary['f_xbar']:.6f}, "
          f"max violation {summary['max_violation']:.3e}, "
          f"queue norm {summary['queue_norm']:.3e}")
    return 0


def verify_command(args):
    out = _out_dir(args)
    instance = _load_instance(args)
    alpha, alpha_rule = _resolve_alpha(args, instance) if args.alpha else (
        instance.default_alpha, "default")
    if alpha is None:
        raise ConfigurationError("--alpha is required")
    args.algo = "vq"
    report, extra = _execute(args, instance, alpha, alpha_rule)
    bounds = _apply_reference(report, _load_reference(args.reference))
    bounds.to_csv(os.path.join(out, "bounds.csv"))
    write_trace_csv(report, os.path.join(out, "trace.csv"))
    write_summary(report, os.path.join(out, "summary.json"),
                  extra={**extra, "bounds": bounds.summary()})
    for name in ("objective", "constraint", "queue", "queue_lower"):
        state = bounds.passed(name)
        tag = "skipped" if state is None else ("ok" if state else "VIOLATED")
        print(f"{name:12s} {tag:9s} worst margin {bounds.worst(name):.3e}")
    return 0 if bounds.ok else 4


def bench_command(args):
    out = _out_dir(args)
    instance = _load_instance(args)
    alpha = instance.default_alpha if args.alpha is None else _resolve_alpha(args, instance)[0]
    program = instance.program
    x0 = np.zeros(program.n)
    rows = []
    vq = run(program, x0, alpha, args.T, record_every=args.record_every,
             label=instance.name)
    dsg = dsg_run(program, None, args.gamma, args.T,
                  record_every=args.record_every, label=instance.name)
    for rep in (vq, dsg):
        row = {"algorithm": rep.algorithm, **rep.final,
               "objective": instance.reported_objective(rep.final["f_xbar"]),
               "wall_time_s": rep.wall_time}
        if instance.f_star is not None:
            row["objective_error"] = abs(rep.final["f_xbar"] - instance.f_star)
        rows.append(row)
    with open(os.path.join(out, "bench.json"), "w") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
        fh.write("\n")
    header = f"{'algo':6s} {'objective':>12s} {'violation':>11s} {'queue':>10s} {'seconds':>8s}"
    print(header)
    for row in rows:
        print(f"{row['algorithm']:6s} {row['objective']:12.6f} "
              f"{row['max_violation']:11.3e} {row['queue_norm']:10.3e} "
              f"{row['wall_time_s']:8.2f}")
    if instance.f_star is not None and all("objective_error" in r for r in rows):
        faster = min(rows, key=lambda r: r["objective_error"])["algorithm"]
        print(f"smaller final error: {faster}")
    return 0


def plot_command(args):
    out = _out_dir(args)
    f_star = args.f_star
    if f_star is None and args.problem:
        inst = _registry_instance(args)
        f_star = inst.f_star
    svg = os.path.join(out, "convergence.svg")
    plot_trace(args.trace, svg, f_star=f_star,
               title=args.problem or os.path.basename(args.trace))
    print(f"wrote {svg}")
    return 0


def slope_command_value(trace_columns, f_star, window):
    """Helper used by tests and notebooks: decay slope of a trace dict."""
    return slope_check(trace_columns["t"], trace_columns["f_xbar"] - f_star, window)


def _add_problem_args(p):
    p.add_argument("--problem", choices=PROBLEM_NAMES, help="named instance")
    p.add_argument("--problem-file", help="JSON problem description")
    p.add_argument("--seed", type=int, default=1, help="seed for the qp instance")


def _add_run_args(p):
    p.add_argument("--algo", choices=("vq", "dsg"), default="vq")
    p.add_argument("--alpha", help="penalty parameter, a number or 'auto'")
    p.add_argument("--gamma", type=float, default=0.01, help="dsg step size")
    p.add_argument("--T", type=int, required=True, help="iteration count")
    p.add_argument("--record-every", type=int, default=None)
    p.add_argument("--x-init", default="zeros", help="'zeros' or a JSON vector file")
    p.add_argument("--out", default=None, help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="qpush",
                                     description="virtual-queue prox experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one solver configuration")
    _add_problem_args(p_run)
    _add_run_args(p_run)
    p_run.add_argument("--full-trace", action="store_true",
                       help="also write per-iteration vectors")
    p_run.add_argument("--verify-bounds", metavar="REF_JSON", default=None,
                       help="fill bound residual columns from a reference file")
    p_run.add_argument("--plot", action="store_true", help="write convergence.svg")

    p_ver = sub.add_parser("verify", help="check decay bounds against a reference")
    _add_problem_args(p_ver)
    _add_run_args(p_ver)
    p_ver.add_argument("--reference", required=True, metavar="REF_JSON")

    p_bench = sub.add_parser("bench", help="paired vq/dsg comparison")
    _add_problem_args(p_bench)
    p_bench.add_argument("--alpha", default=None)
    p_bench.add_argument("--gamma", type=float, default=0.01)
    p_bench.add_argument("--T", type=int, required=True)
    p_bench.add_argument("--record-every", type=int, default=None)
    p_bench.add_argument("--out", default=None)

    p_plot = sub.add_parser("plot", help="re-render a saved trace")
    p_plot.add_argument("--trace", required=True)
    p_plot.add_argument("--f-star", type=float, default=None,
                        help="reference optimum in minimization sense")
    p_plot.add_argument("--problem", choices=PROBLEM_NAMES, default=None)
    p_plot.add_argument("--seed", type=int, default=1)
    p_plot.add_argument("--out", default=None)
    return parser


_COMMANDS = {"run": run_command, "verify": verify_command,
             "bench": bench_command, "plot": plot_command}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigurationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (NonConvergenceError, NumericalDomainError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
