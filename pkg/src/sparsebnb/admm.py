"""ADMM for the node relaxation, batched across branch-and-bound nodes.

The relaxation ``min 0.5*||y - X b||^2 + sum_i psi_i(beta_i)`` with the
splitting ``b = beta`` gives three closed-form updates:

* ``b``: a product with the shared matrix ``D`` (rows of ``B`` for a batch);
* ``beta``: coordinatewise box soft-thresholding, selected by the F0/F1 masks;
* ``v``: the usual scaled-residual dual ascent step.

Each row of an :class:`AdmmBatch` is one node. Rows never interact, so a
batch of K nodes produces the same iterates as K single-node runs.
A valid lower bound for a node is obtained from any ``b`` through the dual
function evaluated at ``r = y - X b``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .core import Fixations, ProblemData, RegimeParams, nu_values, psi_values, recover_zs_masked
from .precompute import Precomputed


@dataclass
class AdmmOptions:
    tol: float = 1e-4
    max_iters: int = 10_000
    check_every: int = 10


@dataclass
class AdmmState:
    b: np.ndarray
    beta: np.ndarray
    v: np.ndarray
    iter: int = 0

    @classmethod
    def zeros(cls, p: int) -> "AdmmState":
        return cls(np.zeros(p), np.zeros(p), np.zeros(p))


@dataclass
class AdmmBatch:
    """K nodes stacked row-wise; masks encode each node's fixations."""

    B: np.ndarray
    Beta: np.ndarray
    V: np.ndarray
    mask0: np.ndarray
    mask1: np.ndarray
    node_ids: List = field(default_factory=list)

    def __post_init__(self):
        if np.any(self.mask0 & self.mask1):
            raise ValueError("a coordinate cannot be fixed to both zero and one")
        if not self.node_ids:
            self.node_ids = list(range(self.B.shape[0]))

    @property
    def size(self) -> int:
        return self.B.shape[0]

    @classmethod
    def build(
        cls,
        fixes: Sequence[Fixations],
        p: int,
        states: Optional[Sequence[Optional[AdmmState]]] = None,
        node_ids: Optional[Sequence] = None,
    ) -> "AdmmBatch":
        K = len(fixes)
        B, Beta, V = np.zeros((K, p)), np.zeros((K, p)), np.zeros((K, p))
        mask0 = np.zeros((K, p), dtype=bool)
        mask1 = np.zeros((K, p), dtype=bool)
        for k, fix in enumerate(fixes):
            mask0[k], mask1[k] = fix.masks(p)
            st = states[k] if states is not None else None
            if st is not None:
                B[k], Beta[k], V[k] = st.b, st.beta, st.v
        return cls(B, Beta, V, mask0, mask1, list(node_ids) if node_ids is not None else [])

    def state(self, k: int, iters: int = 0) -> AdmmState:
        return AdmmState(self.B[k].copy(), self.Beta[k].copy(), self.V[k].copy(), iters)


@dataclass
class RelaxationResult:
    beta_hat: np.ndarray
    z_hat: np.ndarray
    lower_bound: float
    primal_value: float
    dual_value: float
    iterations: int
    converged: bool
    state: AdmmState

    @property
    def rel_gap(self) -> float:
        return (self.primal_value - self.dual_value) / max(1.0, abs(self.primal_value))


def b_update(Beta: np.ndarray, V: np.ndarray, pre: Precomputed) -> np.ndarray:
    """``(c + rho*beta - v) @ D``; ``c`` broadcasts over rows without copies."""
    return pre.apply(pre.c + pre.rho * Beta - V)


def beta_update(
    B: np.ndarray,
    V: np.ndarray,
    mask0: np.ndarray,
    mask1: np.ndarray,
    regime: RegimeParams,
    big_m: float,
    rho: float,
) -> np.ndarray:
    bt = B + V / rho
    fixed = np.clip(regime.fixed_shrink * bt, -big_m, big_m)
    free = np.sign(bt) * np.minimum(np.maximum(np.abs(bt) - regime.free_threshold, 0.0), big_m)
    quad = mask1 | (np.abs(bt) >= regime.switch_level)
    out = np.where(quad, fixed, free)
    out[mask0] = 0.0
    return out


def v_update(V: np.ndarray, B: np.ndarray, Beta: np.ndarray, rho: float) -> np.ndarray:
    return V + rho * (B - Beta)


def admm_iteration(batch: AdmmBatch, pre: Precomputed, prob: ProblemData, regime: RegimeParams | None = None, rows=None) -> AdmmBatch:
    """One b/beta/v sweep over ``rows`` (default: all), updating ``batch`` in place."""
    if regime is None:
        regime = RegimeParams.from_problem(prob, pre.rho)
    if rows is None:
        rows = slice(None)
    V = batch.V[rows]
    B = b_update(batch.Beta[rows], V, pre)
    Beta = beta_update(B, V, batch.mask0[rows], batch.mask1[rows], regime, prob.big_m, pre.rho)
    batch.B[rows] = B
    batch.Beta[rows] = Beta
    batch.V[rows] = v_update(V, B, Beta, pre.rho)
    return batch


def dual_values(Bhat: np.ndarray, mask0: np.ndarray, mask1: np.ndarray, prob: ProblemData) -> np.ndarray:
    """Dual objective at ``r = y - X b`` for each row of ``Bhat``."""
    Bhat = np.atleast_2d(Bhat)
    R = prob.y - Bhat @ prob.X.T
    XtR = R @ prob.X
    nu = nu_values(np.abs(XtR), mask0, mask1, prob)
    return -0.5 * np.einsum("ij,ij->i", R, R) + R @ prob.y - nu.sum(axis=1)


def dual_bound(b_hat: np.ndarray, fix: Fixations, prob: ProblemData, pre: Precomputed | None = None) -> float:
    """Lower bound on the node relaxation, valid for any ``b_hat``."""
    mask0, mask1 = fix.masks(prob.p)
    return float(dual_values(b_hat, mask0, mask1, prob)[0])


def primal_values(Beta: np.ndarray, mask0: np.ndarray, mask1: np.ndarray, prob: ProblemData) -> np.ndarray:
    Beta = np.atleast_2d(Beta)
    R = prob.y - Beta @ prob.X.T
    return 0.5 * np.einsum("ij,ij->i", R, R) + psi_values(Beta, mask0, mask1, prob).sum(axis=1)


def solve_relaxation_batch(
    batch: AdmmBatch,
    pre: Precomputed,
    prob: ProblemData,
    parent_lbs: Optional[Sequence[float]] = None,
    opts: AdmmOptions | None = None,
) -> List[RelaxationResult]:
    """Run ADMM on every row until its relative primal-dual gap is small.

    Rows stop independently: a converged row is frozen while the others
    keep iterating. The dual is evaluated at both ``b`` and ``beta`` of the
    current iterate and the larger value is kept. The gap is checked after the first sweep and then every
    ``opts.check_every`` sweeps. Rows that reach ``opts.max_iters`` come
    back with ``converged=False``; their dual bound is still valid.
    """
    opts = opts or AdmmOptions()
    K = batch.size
    regime = RegimeParams.from_problem(prob, pre.rho)
    parent = np.full(K, -np.inf) if parent_lbs is None else np.asarray(parent_lbs, dtype=float)

    active = np.ones(K, dtype=bool)
    converged = np.zeros(K, dtype=bool)
    iters = np.zeros(K, dtype=int)
    primal = np.full(K, np.inf)
    dual = np.full(K, -np.inf)

    def check(rows):
        primal[rows] = primal_values(batch.Beta[rows], batch.mask0[rows], batch.mask1[rows], prob)
        m0, m1 = batch.mask0[rows], batch.mask1[rows]
        # any point gives a valid bound; beta closes fully fixed nodes at once
        dual[rows] = np.maximum(dual_values(batch.B[rows], m0, m1, prob), dual_values(batch.Beta[rows], m0, m1, prob))
        gap = (primal[rows] - dual[rows]) / np.maximum(1.0, np.abs(primal[rows]))
        return gap <= opts.tol

    t = 0
    while active.any() and t < opts.max_iters:
        rows = np.flatnonzero(active)
        admm_iteration(batch, pre, prob, regime, rows=slice(None) if rows.size == K else rows)
        t += 1
        iters[rows] = t
        if t == 1 or t % opts.check_every == 0:
            done = check(rows)
            converged[rows[done]] = True
            active[rows[done]] = False

    stale = np.flatnonzero(active)
    if stale.size:
        # final iterate of rows that hit the cap
        check(stale)

    results = []
    for k in range(K):
        z, _ = recover_zs_masked(batch.Beta[k], batch.mask0[k], batch.mask1[k], prob)
        results.append(
            RelaxationResult(
                beta_hat=batch.Beta[k].copy(),
                z_hat=z,
                lower_bound=float(max(dual[k], parent[k])),
                primal_value=float(primal[k]),
                dual_value=float(dual[k]),
                iterations=int(iters[k]),
                converged=bool(converged[k]),
                state=batch.state(k, int(iters[k])),
            )
        )
    return results


def solve_relaxation(
    prob: ProblemData,
    pre: Precomputed,
    fix: Fixations = Fixations(),
    warm: AdmmState | None = None,
    parent_lb: float = -np.inf,
    opts: AdmmOptions | None = None,
) -> RelaxationResult:
    batch = AdmmBatch.build([fix], prob.p, [warm])
    return solve_relaxation_batch(batch, pre, prob, [parent_lb], opts)[0]


def warm_start_child(parent_state: AdmmState, new_fix: Fixations, pre: Precomputed) -> AdmmState:
    """Adapt a parent's final iterates to a child's fixations.

    Coefficients of newly zero-fixed coordinates are cleared, then ``b`` and
    ``v`` are refreshed once from the modified ``beta``.
    """
    beta = parent_state.beta.copy()
    beta[list(new_fix.f0)] = 0.0
    b = b_update(beta, parent_state.v, pre)
    v = v_update(parent_state.v, b, beta, pre.rho)
    return AdmmState(b, beta, v, 0)
