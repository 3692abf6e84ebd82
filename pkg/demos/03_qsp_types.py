"""
Quadratic stochastic processes
==============================

Some families are built from stochastic cubic matrices and act on
probability distributions.  The consistency of such a process is checked in
two ways, named A and B; the residuals below measure each.
"""
from algflow import (
    admissible_triples,
    canonical_flows,
    make_flow,
    qsp_residual_A,
    qsp_residual_B,
    trajectory,
)

flows = canonical_flows()
for name in ["E2", "E3", "E4", "E5", "E6"]:
    spec = flows[name]
    triples = admissible_triples(spec, 50, seed=0)
    a = max(qsp_residual_A(spec, None, *tr) for tr in triples)
    b = max(qsp_residual_B(spec, None, *tr) for tr in triples)
    print(f"{name}: type A {a:.1e}   type B {b:.1e}")

# trajectories of the first coordinate decay geometrically
e2 = make_flow("E2", epsilon=0.25, x=0.8)
for t in range(1, 6):
    print(t, trajectory(e2, None, t)[0], 0.5**t * 0.8)
