"""
How algebraic properties change in time
=======================================

A property diagram records, on a grid of (s, t), whether ``M[s, t]`` has a
given property.
"""
from algflow import (
    Const,
    Exp,
    Product,
    Recip,
    TimeGrid,
    canonical_flows,
    detect_homogeneous,
    detect_periodic,
    ea_duration_e8,
    make_flow,
    make_flow_tA,
    scan_property,
    split_associativity_duration,
)

flows = canonical_flows()
grid = TimeGrid(0.0, 5.0, 0.0, 8.0, 20, 20)
gap_grid = TimeGrid(0.0, 5.0, 0.0, 8.0, 20, 20, require_gap=True)

# stochastic processes stay baric, never evolution algebras
d = scan_property(flows["E2"], "Baric", gap_grid)
print("E2 baric everywhere:", d.all_true())
print("E2 evolution nowhere:", scan_property(flows["E2"], "EvolutionAlgebra", gap_grid).all_false())

# a rotation flow is commutative exactly when its parameters are matched
yes = make_flow("E9", a=0.2, b=-0.4, c=0.8, d=0.4)
print("E9 matched commutative:", scan_property(yes, "Commutative", grid).all_true())
print("E9 generic commutative:", scan_property(flows["E9"], "Commutative", grid).n_true)

# the rotation pair is commutative on lines t - s = 3 pi / 4 + n pi
fine = TimeGrid(0.0, 2.0, 0.0, 10.0, 5, 1001)
d = scan_property(flows["E7"], "Commutative", fine, tol=0.01)
print("E7 commutative cells (s, t - s):", [(s, round(t - s, 2)) for s, t in d.true_cells()][:6])
print("E7 period:", detect_periodic(flows["E7"], TimeGrid(0.0, 1.0, 0.0, 8.0, 3, 9)))
print("E7 homogeneous:", detect_homogeneous(flows["E7"], grid))

# evolution-algebra duration of E8, with a closed-form check
psi = Exp(1.0)
k11 = Recip(Product((Const(2.0), psi)))
print("E8 evolution everywhere:", ea_duration_e8(psi, k11, Const(0.0), grid).all_true())

# split construction: direct associativity condition against the generic scan
spec = make_flow_tA(flows["TA"].params["afamily"], (0.2, 0.8))
small = TimeGrid(0.0, 2.0, 0.0, 2.0, 10, 10)
fast = split_associativity_duration(spec, small)
print("split agrees with generic:", fast.agrees_with(scan_property(spec, "Associative", small)))
print(fast.to_csv().splitlines()[:4])
