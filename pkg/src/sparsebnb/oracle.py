"""Brute-force ground truth for tiny instances.

Nothing here calls into the ADMM or projected-gradient code; only the pure
penalty formulas of :mod:`sparsebnb.core` are shared.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.optimize import lsq_linear

from .core import Fixations, ProblemData, psi_values
from .exceptions import TooLarge

MAX_ENUM_P = 14
MAX_RELAX_P = 10


@dataclass
class OracleResult:
    objective: float
    support: Tuple[int, ...]
    beta: np.ndarray


def box_ridge_exact(prob: ProblemData, support, gram=None) -> np.ndarray:
    """Exact minimizer of the box-constrained ridge problem on ``support``."""
    S = list(support)
    beta = np.zeros(prob.p)
    if not S:
        return beta
    G = prob.X.T @ prob.X if gram is None else gram
    A = G[np.ix_(S, S)] + 2.0 * prob.lambda2 * np.eye(len(S))
    sol = np.linalg.solve(A, prob.Xty[S])
    if np.abs(sol).max() > prob.big_m:
        # bounded-variable least squares on the ridge-augmented system
        Xa = np.vstack([prob.X[:, S], np.sqrt(2.0 * prob.lambda2) * np.eye(len(S))])
        ya = np.concatenate([prob.y, np.zeros(len(S))])
        sol = lsq_linear(Xa, ya, bounds=(-prob.big_m, prob.big_m), method="bvls", tol=1e-14).x
    beta[S] = sol
    return beta


def enumerate_exact(prob: ProblemData) -> OracleResult:
    """Global optimum over all ``2**p`` supports.

    Supports are scanned by increasing size, then lexicographically, and a
    later support replaces the incumbent only if strictly better, so ties go
    to smaller and lexicographically first supports.
    """
    p = prob.p
    if p > MAX_ENUM_P:
        raise TooLarge(f"enumeration limited to p <= {MAX_ENUM_P}, got {p}")
    G = prob.X.T @ prob.X
    best = OracleResult(0.5 * prob.y_sq_norm, (), np.zeros(p))
    for k in range(1, p + 1):
        for S in itertools.combinations(range(p), k):
            beta = box_ridge_exact(prob, S, G)
            obj = prob.objective(beta, S)
            if obj < best.objective - 1e-12 * max(1.0, abs(best.objective)):
                best = OracleResult(obj, S, beta)
    return best


def _psi_prox(u: np.ndarray, L: float, mask0, mask1, prob: ProblemData) -> np.ndarray:
    """argmin_b (L/2)(b-u)^2 + psi(b) over the box, by candidate enumeration."""
    l0, l2, m = prob.lambda0, prob.lambda2, prob.big_m
    ratio = np.sqrt(l0 / l2)
    s, au = np.sign(u), np.abs(u)
    quad = s * np.clip(L * au / (L + 2.0 * l2), 0.0, m)
    if ratio <= m:
        k = 2.0 * np.sqrt(l0 * l2)
        lin = s * np.clip(au - k / L, 0.0, ratio)
        quad_free = s * np.clip(L * au / (L + 2.0 * l2), ratio, m)
    else:
        k = l0 / m + l2 * m
        lin = s * np.clip(au - k / L, 0.0, m)
        quad_free = lin
    cands = np.stack([np.zeros_like(u), lin, quad_free, quad, s * m])
    vals = 0.5 * L * (cands - u) ** 2 + psi_values(cands, mask0, mask1, prob)
    return cands[np.argmin(vals, axis=0), np.arange(u.size)]


def relaxation_oracle(
    prob: ProblemData,
    fix: Fixations = Fixations(),
    tol: float = 1e-8,
    max_iters: int = 500_000,
    return_beta: bool = False,
):
    """Minimum of the beta-only node relaxation by restarted FISTA.

    The returned value is the objective at a feasible point, hence never
    below the true relaxation optimum.
    """
    p = prob.p
    if p > MAX_RELAX_P:
        raise TooLarge(f"relaxation oracle limited to p <= {MAX_RELAX_P}, got {p}")
    mask0, mask1 = fix.masks(p)
    X, y = prob.X, prob.y
    L = max(np.linalg.norm(X, 2) ** 2, 1e-12)

    def F(b):
        r = y - X @ b
        return 0.5 * (r @ r) + psi_values(b, mask0, mask1, prob).sum()

    def stationarity(b):
        g = X.T @ (X @ b - y)
        return L * np.abs(_psi_prox(b - g / L, L, mask0, mask1, prob) - b).max()

    beta = np.zeros(p)
    mom, theta = beta.copy(), 1.0
    f_prev = F(beta)
    f_best, b_best = f_prev, beta.copy()
    for it in range(1, max_iters + 1):
        grad = X.T @ (X @ mom - y)
        new = _psi_prox(mom - grad / L, L, mask0, mask1, prob)
        f_new = F(new)
        if f_new > f_prev + 1e-15 * max(1.0, abs(f_prev)):
            # adaptive restart from the last accepted iterate
            mom, theta = beta.copy(), 1.0
        else:
            theta_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
            mom = new + ((theta - 1.0) / theta_next) * (new - beta)
            beta, theta, f_prev = new, theta_next, f_new
            if f_new < f_best:
                f_best, b_best = f_new, new.copy()
        if it % 25 == 0 and stationarity(b_best) <= tol * max(1.0, L):
            break
    return (f_best, b_best) if return_beta else f_best
