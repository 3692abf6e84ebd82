"""
Cubic matrices and their products
=================================

A finite-dimensional algebra with basis e_0..e_{m-1} is stored as a cubic
matrix ``M`` of shape (m, m, m): ``e_i e_j = sum_k M[i, j, k] e_k``.
"""
import numpy as np

from algflow import (
    AssocOp,
    algebra_product,
    associator_defect,
    check_algebra_property,
    check_stochastic,
    collapse,
    layer,
    mul_c,
    mul_d,
    mul_e,
    mul_general,
    qso_apply,
)

rng = np.random.default_rng(0)
A, B, C = rng.normal(size=(3, 2, 2, 2))

# the three products are associative
for name, mul in [("C", mul_c), ("D", mul_d), ("E", mul_e)]:
    err = np.max(np.abs(mul(mul(A, B), C) - mul(A, mul(B, C))))
    print(f"rule {name}: associativity error {err:.1e}")

# rule C acts layer by layer, D and E through the middle-index sum
print("layer j=1 :", np.allclose(layer(mul_c(A, B), 1), layer(A, 1) @ layer(B, 1)))
print("collapse D:", np.allclose(collapse(mul_d(A, B)), collapse(A) @ collapse(B)))
print("collapse E:", np.allclose(collapse(mul_e(A, B)), collapse(A) @ collapse(B)))

# a general product picks the middle index from an associative table on labels
print("j o n = j gives rule D:", np.allclose(mul_general(A, B, AssocOp.left(2)), mul_d(A, B)))
print("j o n = n gives rule E:", np.allclose(mul_general(A, B, AssocOp.right(2)), mul_e(A, B)))

# algebra structure of a cubic matrix
M = np.zeros((2, 2, 2))
M[0, 0, 0] = 1.0
M[1, 1, 1] = 1.0
u, v = np.array([1.0, 2.0]), np.array([3.0, -1.0])
print("u v =", algebra_product(M, u, v))
print("associator defect:", associator_defect(M))
for prop in ["Commutative", "Associative", "EvolutionAlgebra", "Baric"]:
    print(f"{prop:>16}: {check_algebra_property(M, prop)}")

# a stochastic cubic matrix defines a quadratic stochastic operator
Q = np.full((2, 2, 2), 0.5)
print("K-stochastic:", check_stochastic(Q, "K"))
print("V(x) =", qso_apply(Q, np.array([0.3, 0.7])))
