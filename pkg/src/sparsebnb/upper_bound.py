"""Feasible solutions from rounded relaxations.

For a fixed support S the problem reduces to the box-constrained ridge
regression ``min 0.5*||y - X_S b||^2 + lambda2*||b||^2, |b_i| <= M``, solved
here by accelerated projected gradient with Armijo backtracking. Supports of
K nodes are stacked as rows of a masked ``K x p`` matrix and updated together.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .core import Fixations, ProblemData


@dataclass
class FpgOptions:
    tol: float = 1e-8
    max_iters: int = 5000
    backtrack: float = 0.5
    max_halvings: int = 50


@dataclass
class SupportBatch:
    Bmat: np.ndarray
    Mask: np.ndarray
    alpha: np.ndarray
    active: np.ndarray

    @classmethod
    def build(
        cls,
        supports: Sequence[Sequence[int]],
        prob: ProblemData,
        init: Optional[Sequence[Optional[np.ndarray]]] = None,
    ) -> "SupportBatch":
        K, p = len(supports), prob.p
        Mask = np.zeros((K, p))
        for k, S in enumerate(supports):
            Mask[k, list(S)] = 1.0
        Bmat = np.zeros((K, p))
        if init is not None:
            for k, b0 in enumerate(init):
                if b0 is not None:
                    Bmat[k] = np.clip(b0, -prob.big_m, prob.big_m)
        Bmat *= Mask
        return cls(Bmat, Mask, initial_stepsizes(Mask, prob), np.ones(K, dtype=bool))


@dataclass
class FeasibleSolution:
    beta: np.ndarray
    support: Tuple[int, ...]
    objective: float
    iterations: int = 0
    converged: bool = True

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.beta))


def round_support(z_hat: np.ndarray, fix: Fixations = Fixations()) -> Tuple[int, ...]:
    """``F1`` plus every non-F0 coordinate with ``z >= 0.5``."""
    keep = np.asarray(z_hat) >= 0.5
    keep[list(fix.f0)] = False
    keep[list(fix.f1)] = True
    return tuple(int(i) for i in np.flatnonzero(keep))


def initial_stepsizes(Mask: np.ndarray, prob: ProblemData) -> np.ndarray:
    # trace bound on the Lipschitz constant of the masked gradient
    L = prob.col_sq_norms.max(initial=0.0) * Mask.sum(axis=1) + 2.0 * prob.lambda2
    return 1.0 / L


def restricted_gradient(Bmat: np.ndarray, Mask: np.ndarray, prob: ProblemData) -> np.ndarray:
    """Row-wise ``X^T (X b - y) + 2*lambda2*b``, zeroed off each row's support."""
    R = Bmat @ prob.X.T - prob.y
    return (R @ prob.X + 2.0 * prob.lambda2 * Bmat) * Mask


def box_ridge_values(Bmat: np.ndarray, prob: ProblemData) -> np.ndarray:
    Bmat = np.atleast_2d(Bmat)
    R = prob.y - Bmat @ prob.X.T
    return 0.5 * np.einsum("ij,ij->i", R, R) + prob.lambda2 * np.einsum("ij,ij->i", Bmat, Bmat)


def fpg_solve_batch(
    batch: SupportBatch,
    prob: ProblemData,
    opts: FpgOptions | None = None,
    callback: Optional[Callable] = None,
) -> List[FeasibleSolution]:
    """Solve every row's box-ridge problem; rows stop independently.

    ``callback(t, rows, u_extrap, u_new)`` is invoked after each accepted
    step with the objective at the extrapolated point and at the new iterate.
    """
    opts = opts or FpgOptions()
    m = prob.big_m
    Mask = batch.Mask
    alpha0 = batch.alpha.copy()
    cur = batch.Bmat.copy()
    prev = cur.copy()
    u_cur = box_ridge_values(cur, prob)
    iters = np.zeros(batch.Bmat.shape[0], dtype=int)
    converged = np.zeros_like(batch.active)
    active = batch.active.copy()

    t = 0
    while active.any() and t < opts.max_iters:
        rows = np.flatnonzero(active)
        X0, Xm1, Mk = cur[rows], prev[rows], Mask[rows]
        Bt = X0 + (t / (t + 3.0)) * (X0 - Xm1)
        G = restricted_gradient(Bt, Mk, prob)
        u_t = box_ridge_values(Bt, prob)
        alpha = alpha0[rows].copy()
        cand = np.empty_like(Bt)
        u_c = np.empty(rows.size)
        pending = np.arange(rows.size)
        for _ in range(opts.max_halvings + 1):
            a = alpha[pending, None]
            trial = np.clip(Bt[pending] - a * G[pending], -m, m) * Mk[pending]
            u_trial = box_ridge_values(trial, prob)
            d = trial - Bt[pending]
            rhs = u_t[pending] + np.einsum("ij,ij->i", G[pending], d) + np.einsum("ij,ij->i", d, d) / (2.0 * alpha[pending])
            ok = u_trial <= rhs + 1e-12 * np.maximum(1.0, np.abs(rhs))
            cand[pending[ok]] = trial[ok]
            u_c[pending[ok]] = u_trial[ok]
            pending = pending[~ok]
            if pending.size == 0:
                break
            alpha[pending] *= opts.backtrack
        if pending.size:
            # halving budget exhausted: keep the smallest-step trial, still feasible
            cand[pending] = trial
            u_c[pending] = u_trial
        batch.alpha[rows] = alpha
        if callback is not None:
            callback(t, rows, u_t, u_c)

        step = np.abs(cand - X0).max(axis=1)
        # decrease of the accepted step from the extrapolated point; unlike the
        # change between consecutive iterates it only vanishes at stationarity
        decrease = np.abs(u_t - u_c)
        prev[rows] = X0
        cur[rows] = cand
        u_cur[rows] = u_c
        t += 1
        iters[rows] = t
        done = (decrease <= opts.tol * np.maximum(1.0, np.abs(u_c))) | (step <= opts.tol)
        converged[rows[done]] = True
        active[rows[done]] = False

    batch.Bmat[:] = cur
    batch.active[:] = active
    out = []
    for k in range(cur.shape[0]):
        S = tuple(int(i) for i in np.flatnonzero(Mask[k]))
        beta = cur[k].copy()
        out.append(FeasibleSolution(beta, S, prob.objective(beta, S), int(iters[k]), bool(converged[k])))
    return out


def fpg_solve(
    support: Sequence[int],
    prob: ProblemData,
    beta0: Optional[np.ndarray] = None,
    opts: FpgOptions | None = None,
) -> FeasibleSolution:
    batch = SupportBatch.build([tuple(support)], prob, [beta0])
    return fpg_solve_batch(batch, prob, opts)[0]
