"""Exact l0-l2 penalized sparse regression by branch-and-bound.

Lower bounds come from an ADMM solve of each node's perspective relaxation
(with a dual certificate valid at any iterate), upper bounds from projected
gradient on rounded supports, and the incumbent is seeded by a
forward-backward matching pursuit.
"""
from .admm import AdmmBatch, AdmmOptions, AdmmState, RelaxationResult, dual_bound, solve_relaxation, solve_relaxation_batch
from .core import Fixations, ProblemData, RegimeParams, box_soft_threshold, dual_h, dual_nu, psi, recover_zs
from .data import Instance, SyntheticSpec, generate, load_csv, read_report, tune_lambda2, write_report
from .exceptions import (
    DimensionMismatch,
    InfeasibleFixation,
    InvalidSpec,
    IterationLimit,
    NoFractional,
    NumericalFailure,
    ParseError,
    SparseBnbError,
    TooLarge,
)
from .matching_pursuit import run_matching_pursuit
from .precompute import Precomputed, build_precomputed
from .tree import BnbOptions, SolveReport, Status, solve
from .upper_bound import FeasibleSolution, FpgOptions, fpg_solve, fpg_solve_batch, round_support

__version__ = "0.1.0"
