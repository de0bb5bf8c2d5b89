"""
Node relaxations, dual certificates and warm starts
===================================================

Every node of the tree solves a convex relaxation with ADMM. Any ADMM
iterate gives a valid lower bound through the dual, so a node can be pruned
before the solver has converged.
"""
import numpy as np

from sparsebnb import Fixations, SyntheticSpec, build_precomputed, dual_bound, generate, solve_relaxation
from sparsebnb.admm import AdmmOptions, warm_start_child
from sparsebnb.oracle import relaxation_oracle
from sparsebnb.tree import branch_variable

prob = generate(SyntheticSpec(40, 10, 3, 0.2, 5.0, seed=4)).problem(2.0, 0.5, 3.0)
pre = build_precomputed(prob, rho=1.0)

# root relaxation against an independent proximal-gradient solve
root = solve_relaxation(prob, pre)
print("ADMM primal", root.primal_value, "dual", root.dual_value, "iterations", root.iterations)
print("reference  ", relaxation_oracle(prob))

# the dual is a bound at any point, even a random one; it is just weaker there
rng = np.random.default_rng(0)
for scale in (0.0, 0.1, 1.0):
    b = root.state.b + scale * rng.standard_normal(prob.p)
    print(f"perturbation {scale}: bound {dual_bound(b, Fixations(), prob):.4f}")

# tightening the tolerance closes the primal-dual gap
for tol in (1e-2, 1e-4, 1e-6):
    r = solve_relaxation(prob, pre, opts=AdmmOptions(tol=tol, max_iters=100_000))
    print(f"tol {tol:g}: gap {r.rel_gap:.2e} after {r.iterations} iterations")

# children start from the parent's iterates
j = branch_variable(root, Fixations())
print("branching on", j)
for fix in (Fixations(f0=(j,)), Fixations(f1=(j,))):
    warm = solve_relaxation(prob, pre, fix, warm_start_child(root.state, fix, pre))
    cold = solve_relaxation(prob, pre, fix)
    print(f"{fix}: warm {warm.iterations} iterations, cold {cold.iterations}, bounds {warm.lower_bound:.4f} / {cold.lower_bound:.4f}")
