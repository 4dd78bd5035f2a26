#!/usr/bin/env python3
"""A-posteriori certificates: every recorded iteration obeys the theory.

Given a reference optimum (x*, lambda*), four inequalities must hold at
every recorded t: the objective of the average exceeds f* by at most
alpha ||x* - x(-1)||^2 / t; every constraint value of the average stays
below C/t; the queue norm stays below C; and each queue dominates its
cumulative constraint sum.  This demo runs the flow-control network,
checks all four and writes the trace, margins and a log-log SVG.

Run:  python3 demos/05_bound_certificates.py [outdir]
"""

import os
import sys

import numpy as np

import qpush as qp
from qpush.report import write_trace_csv

out = sys.argv[1] if len(sys.argv) > 1 else "demo-out"
os.makedirs(out, exist_ok=True)

inst = qp.get_problem("fig1-num")
program = inst.program
z_star, lam_star, f_star = qp.fig1_reference()
print(f"reference: f* = {f_star:.6f}, ||lambda*|| = {np.linalg.norm(lam_star):.4f}, "
      f"KKT residual = {qp.kkt_residual(program, z_star, lam_star):.1e}")

rep = qp.run(program, np.zeros(10), 10.0, 50_000, label="fig1-num")
bounds = qp.verify_bounds(rep, f_star, z_star, lam_star, program.beta_hint)

print(f"certificate constant C = {bounds.constant:.3f}\n")
print(f"{'bound':>12s} {'status':>8s} {'worst margin':>13s}")
for name in ("objective", "constraint", "queue", "queue_lower"):
    status = "ok" if bounds.passed(name) else "VIOLATED"
    print(f"{name:>12s} {status:>8s} {bounds.worst(name):13.3e}")

trace = os.path.join(out, "trace.csv")
write_trace_csv(rep, trace)
bounds.to_csv(os.path.join(out, "bounds.csv"))
qp.plot_trace(trace, os.path.join(out, "convergence.svg"),
              f_star=f_star, bound_constant=bounds.constant,
              title="flow control: error, violations, 1/t and C/t")
print(f"\nwrote {trace}, bounds.csv and convergence.svg under {out}/")
