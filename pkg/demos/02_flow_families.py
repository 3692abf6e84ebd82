"""
Flows of algebras
=================

A flow is a family ``M[s, t]`` of cubic matrices, ``0 <= s <= t``, obeying
the Kolmogorov-Chapman equation ``M[s, t] = M[s, tau] * M[tau, t]`` for one
of the products C, D or E.
"""
import numpy as np

from algflow import (
    Exp,
    admissible_triples,
    canonical_flows,
    eval_flow,
    kc_residual,
    make_flow,
)

flows = canonical_flows()
for name, spec in flows.items():
    worst = max(kc_residual(spec, *tr) for tr in admissible_triples(spec, 50, seed=0))
    print(f"{name:>4} rule {spec.rule}: max KC residual {worst:.1e}")

# a rotation-type flow, with the parameters shown explicitly
e9 = make_flow("E9", a=0.2, b=-0.4, c=0.8, d=1.4)
np.set_printoptions(precision=4, suppress=True)
print(eval_flow(e9, 0.5, 2.0))

# the same flow does not satisfy the layer-wise equation
print("under rule C:", kc_residual(e9, 0.5, 1.0, 2.0, rule="C"))

# functions of time are small descriptor trees
e8 = make_flow("E8", psi=Exp(1.0), kappa11=0.1, kappa21=0.2)
print(e8.to_json())
