"""
Limits, density and closure
===========================

Long-time behaviour of a flow, how densely ``sin(n)`` fills [-1, 1], and
which stochasticity classes survive a product.
"""
from algflow import (
    canonical_flows,
    density_search,
    limit_algebra,
    make_flow,
    stochasticity_closure_sweep,
)
from algflow.analysis import density_witness, limit_search

flows = canonical_flows()

e2 = make_flow("E2", epsilon=0.25, x=0.5)
search = limit_search(e2, 0.0, 64, tol=1e-5)
for d, dist in zip(search.deltas[1:], search.distances):
    print(f"delta {d:>4g}: step {dist:.2e}")
print("E2 limit:\n", limit_algebra(e2, 0.0, 64, 1e-5))
print("E9 limit:", limit_algebra(flows["E9"], 0.0, 64, 1e-5))

print("first n with |sin n| < 1e-4:", density_search(0.0, 1e-4, 1000))
w = density_witness(0.5, 1e-3, 10**5, flows["E9"])
print(w.to_json())

for kind in ["K", "Pair12", "Pair13", "Pair23", "Twice"]:
    row = [stochasticity_closure_sweep(kind, rule, 200, seed=0, m=3).fraction for rule in "CDE"]
    print(f"{kind:>6}: C {row[0]:.2f}  D {row[1]:.2f}  E {row[2]:.2f}")
