#!/usr/bin/env python3
"""Joint rate and power control with elastic link capacities.

The same network as demo 01, but each link's capacity is log(1 + p_l)
for a power variable p_l costing 0.25 per unit.  The capacity rows are
now nonlinear (concave capacities), which dual decomposition and the
queue solver handle directly; at the optimum the published value of
utility minus power cost is -0.521318.

Run:  python3 demos/03_joint_flow_power.py [T]
"""

import sys

import numpy as np

import qpush as qp

T = int(sys.argv[1]) if len(sys.argv) > 1 else 20_000

inst = qp.get_problem("fig1-flow-power")
program = inst.program
print(f"decision vector: 7 path rates + 3 source rates + 9 link powers "
      f"= {program.n} coordinates")
print(f"slope-bound pattern matrix gives beta = {program.beta_hint:.4f}")

rep = qp.run(program, np.zeros(program.n), 10.0, T, label="fig1-flow-power")

value = -rep.final["f_xbar"]
print(f"\nutility - power cost at T={T}: {value:.6f} (published -0.521318)")
print(f"worst averaged constraint violation: {rep.final['max_violation']:.2e}")

zbar = rep.x_bar[-1]
print("\naveraged source rates:", np.round(zbar[7:10], 4))
print("averaged link powers :", np.round(zbar[10:], 4))
print("implied capacities   :", np.round(np.log1p(zbar[10:]), 4))
print("\nidle links keep p near 0; congested links buy capacity until the")
print("marginal price 0.25(1+p) matches their congestion price.")
