"""
Certifying a sparse regression on a tiny problem
================================================

A 30 x 10 design is small enough to enumerate all 1024 supports, so the
branch-and-bound answer can be checked against brute force.
"""
import numpy as np

from sparsebnb import BnbOptions, SyntheticSpec, generate, solve
from sparsebnb.oracle import enumerate_exact

inst = generate(SyntheticSpec(n=30, p=10, k0=3, corr=0.3, snr=5.0, seed=1))
print("planted support:", inst.support)

# penalties: lambda0 charges each nonzero, lambda2 is a ridge term, M boxes the coefficients
prob = inst.problem(lambda0=0.5, lambda2=0.05, big_m=3.0)

# watch the bounds close round by round
def show(info):
    print(f"  round {info['iter']:3d}  ub {info['ub']:.6f}  lb {info['lb']:.6f}  open {info['open']}")

rep = solve(prob, BnbOptions(gap_tol=0.0), progress=show)
print(rep.status.value, "objective", rep.best_objective, "support", rep.support, "nodes", rep.nodes_solved)

exact = enumerate_exact(prob)
print("enumeration:", exact.objective, exact.support)
print("difference:", abs(rep.best_objective - exact.objective))

# larger lambda0 buys sparser models
for lam in (0.05, 0.5, 5.0, 50.0):
    r = solve(prob.with_penalties(lambda0=lam), BnbOptions(gap_tol=1e-6))
    print(f"lambda0={lam:>5}: {len(r.support)} nonzeros, support {r.support}")
