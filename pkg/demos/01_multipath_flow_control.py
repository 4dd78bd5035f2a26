#!/usr/bin/env python3
"""Multipath rate allocation on the bundled 9-link network.

Three sources share seven paths over nine unit-capacity links and split
their traffic to maximize log(y1) + 2 log(y2) + 2 log(y3).  The
virtual-queue prox solver reaches the optimum utility 1.65687 with an
O(1/t) error, while the classic dual subgradient with primal averaging
(step size 0.01) stalls at an error floor set by its step size.

Run:  python3 demos/01_multipath_flow_control.py [T]
"""

import sys

import numpy as np

import qpush as qp

T = int(sys.argv[1]) if len(sys.argv) > 1 else 20_000

inst = qp.get_problem("fig1-num")
program = inst.program
z_star, lam_star, f_star = qp.fig1_reference()

print(f"network: {inst.topology.L} links, {inst.topology.K} paths, "
      f"{inst.topology.S} sources")
print(f"constraint map Lipschitz modulus beta = {program.beta_hint:.4f} "
      f"(hop bound {qp.beta_bounds(inst.topology)[0]:.4f})")
print(f"penalty alpha = {inst.default_alpha} "
      f"(hop-count rule would give {qp.half_hop_alpha(inst.topology)})")
print(f"optimal utility = {-f_star:.5f}\n")

vq = qp.run(program, np.zeros(program.n), inst.default_alpha, T, label="fig1-num")
dsg = qp.dsg_run(program, None, 0.01, T, label="fig1-num")

print(f"{'t':>8s} {'vq error':>12s} {'dsg error':>12s} {'vq violation':>13s}")
for t in (10, 100, 1000, 10_000, T):
    if t > T:
        continue
    i = int(np.searchsorted(vq.t, t))
    j = int(np.searchsorted(dsg.t, t))
    print(f"{t:8d} {abs(vq.f_xbar[i] - f_star):12.3e} "
          f"{abs(dsg.f_xbar[j] - f_star):12.3e} {vq.max_violation[i]:13.3e}")

slope = qp.slope_check(vq.t, vq.f_xbar - f_star, (100, T))
print(f"\nlog-log decay slope of the vq error: {slope.slope:.3f} "
      "(a pure 1/t law gives -1)")

rates = vq.x_bar[-1]
print("averaged path rates :", np.round(rates[:7], 4))
print("averaged source rates:", np.round(rates[7:], 4),
      " (optimum 0.8, 1.6, 1.6)")
