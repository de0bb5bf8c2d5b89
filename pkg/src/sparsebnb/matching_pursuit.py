"""Forward-backward greedy heuristic used to seed the incumbent at the root.

Each candidate is scored by the exact change of the penalized objective
when a single coefficient enters (or leaves) with the residual of all other
coefficients frozen. The best-scoring move is taken while it decreases the
objective.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Set, Tuple

import numpy as np

from .core import ProblemData
from .upper_bound import FeasibleSolution, FpgOptions, fpg_solve

REFRESH_EVERY = 50


@dataclass
class MpState:
    support: Set[int]
    beta: np.ndarray
    residual: np.ndarray
    accepted: int = 0

    @classmethod
    def empty(cls, prob: ProblemData) -> "MpState":
        return cls(set(), np.zeros(prob.p), prob.y.copy())


@dataclass
class MpOptions:
    max_outer: int | None = None  # default 4 * p
    polish: bool = True
    fpg: FpgOptions = field(default_factory=FpgOptions)


def surrogate_objective(state: MpState, prob: ProblemData) -> float:
    r = state.residual
    b = state.beta
    return float(0.5 * (r @ r) + prob.lambda2 * (b @ b) + prob.lambda0 * len(state.support))


def _accept(state: MpState, prob: ProblemData):
    state.accepted += 1
    if state.accepted % REFRESH_EVERY == 0:
        state.residual = prob.y - prob.X @ state.beta


def forward_scores(state: MpState, prob: ProblemData):
    """Clamped single-coordinate fits and objective changes for all j."""
    c = prob.X.T @ state.residual
    D = prob.col_sq_norms + 2.0 * prob.lambda2
    b = np.clip(c / D, -prob.big_m, prob.big_m)
    delta = -b * c + 0.5 * D * b * b + prob.lambda0
    return b, delta


def forward_step(state: MpState, prob: ProblemData) -> Tuple[MpState, bool]:
    b, delta = forward_scores(state, prob)
    if state.support:
        delta[list(state.support)] = np.inf
    j = int(np.argmin(delta))  # first minimum: lowest index wins ties
    if not delta[j] < 0:
        return state, False
    state.support.add(j)
    state.beta[j] = b[j]
    state.residual = state.residual - prob.X[:, j] * b[j]
    _accept(state, prob)
    return state, True


def backward_step(state: MpState, prob: ProblemData) -> Tuple[MpState, bool]:
    if not state.support:
        return state, False
    S = np.array(sorted(state.support))
    XS = prob.X[:, S]
    c = XS.T @ state.residual
    b = state.beta[S]
    delta = b * c + (0.5 * prob.col_sq_norms[S] - prob.lambda2) * b * b - prob.lambda0
    k = int(np.argmin(delta))
    if not delta[k] < 0:
        return state, False
    j = int(S[k])
    state.support.discard(j)
    state.residual = state.residual + prob.X[:, j] * state.beta[j]
    state.beta[j] = 0.0
    _accept(state, prob)
    return state, True


def run_matching_pursuit(prob: ProblemData, opts: MpOptions | None = None) -> FeasibleSolution:
    """Alternate one forward and one backward move until the support settles.

    The final support is re-fit by projected gradient (``opts.polish``),
    which can only lower the objective.
    """
    opts = opts or MpOptions()
    max_outer = 4 * prob.p if opts.max_outer is None else opts.max_outer
    state = MpState.empty(prob)
    for _ in range(max_outer):
        state, added = forward_step(state, prob)
        state, removed = backward_step(state, prob)
        if not (added or removed):
            break
    S = tuple(sorted(state.support))
    greedy = FeasibleSolution(state.beta.copy(), S, prob.objective(state.beta, S))
    if opts.polish:
        polished = fpg_solve(S, prob, state.beta, opts.fpg)
        if polished.objective <= greedy.objective:
            return polished
    return greedy
