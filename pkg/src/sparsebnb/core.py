"""Problem data and the penalty/operator formulas shared by every solver.

The node relaxation replaces ``lambda2 * beta_i**2`` plus the indicator cost
``lambda0 * z_i`` by its perspective closure ``psi_i``, which depends on
whether coordinate ``i`` is fixed to zero (F0), fixed to one (F1) or free.
Everything here is a pure function of immutable inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Tuple

import numpy as np

from .exceptions import InfeasibleFixation


@dataclass(frozen=True, eq=False)
class ProblemData:
    """An instance of l0-l2 penalized least squares with a box bound.

    Minimizes ``0.5*||y - X beta||^2 + lambda0*||beta||_0 + lambda2*||beta||^2``
    subject to ``||beta||_inf <= big_m``.
    """

    X: np.ndarray
    y: np.ndarray
    lambda0: float
    lambda2: float
    big_m: float

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=float)
        y = np.ascontiguousarray(self.y, dtype=float).reshape(-1)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if not np.isfinite(X).all() or not np.isfinite(y).all():
            raise ValueError("X and y must be finite")
        if not self.lambda0 >= 0:
            raise ValueError(f"lambda0 must be >= 0, got {self.lambda0}")
        # every regime formula divides by lambda2
        if not self.lambda2 > 0:
            raise ValueError(f"lambda2 must be > 0, got {self.lambda2}")
        if not self.big_m > 0:
            raise ValueError(f"big_m must be > 0, got {self.big_m}")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "lambda0", float(self.lambda0))
        object.__setattr__(self, "lambda2", float(self.lambda2))
        object.__setattr__(self, "big_m", float(self.big_m))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @cached_property
    def col_sq_norms(self) -> np.ndarray:
        return np.einsum("ij,ij->j", self.X, self.X)

    @cached_property
    def Xty(self) -> np.ndarray:
        return self.X.T @ self.y

    @cached_property
    def y_sq_norm(self) -> float:
        return float(self.y @ self.y)

    @property
    def sqrt_ratio(self) -> float:
        return float(np.sqrt(self.lambda0 / self.lambda2))

    def with_penalties(self, lambda0=None, lambda2=None, big_m=None) -> "ProblemData":
        return ProblemData(
            self.X,
            self.y,
            self.lambda0 if lambda0 is None else lambda0,
            self.lambda2 if lambda2 is None else lambda2,
            self.big_m if big_m is None else big_m,
        )

    def objective(self, beta: np.ndarray, support: Iterable[int] | None = None) -> float:
        """Objective of the original problem.

        When ``support`` is given, ``lambda0`` is charged for every index in
        it (the MIP objective with ``z`` equal to its indicator) instead of
        for the nonzeros of ``beta``.
        """
        beta = np.asarray(beta, dtype=float)
        r = self.y - self.X @ beta
        k = np.count_nonzero(beta) if support is None else len(tuple(support))
        return float(0.5 * (r @ r) + self.lambda0 * k + self.lambda2 * (beta @ beta))


@dataclass(frozen=True)
class Fixations:
    """Index sets forced to ``z = 0`` (f0) and ``z = 1`` (f1) along a branch."""

    f0: Tuple[int, ...] = ()
    f1: Tuple[int, ...] = ()

    def __post_init__(self):
        f0 = tuple(sorted({int(i) for i in self.f0}))
        f1 = tuple(sorted({int(i) for i in self.f1}))
        if set(f0) & set(f1):
            raise ValueError(f"f0 and f1 overlap: {sorted(set(f0) & set(f1))}")
        object.__setattr__(self, "f0", f0)
        object.__setattr__(self, "f1", f1)

    def masks(self, p: int) -> Tuple[np.ndarray, np.ndarray]:
        mask0 = np.zeros(p, dtype=bool)
        mask1 = np.zeros(p, dtype=bool)
        mask0[list(self.f0)] = True
        mask1[list(self.f1)] = True
        return mask0, mask1

    def free(self, p: int) -> np.ndarray:
        mask0, mask1 = self.masks(p)
        return np.flatnonzero(~(mask0 | mask1))

    def fix_zero(self, j: int) -> "Fixations":
        return Fixations(self.f0 + (j,), self.f1)

    def fix_one(self, j: int) -> "Fixations":
        return Fixations(self.f0, self.f1 + (j,))

    @property
    def size(self) -> int:
        return len(self.f0) + len(self.f1)


@dataclass(frozen=True)
class RegimeParams:
    """Thresholds of the closed-form beta update for a given ADMM penalty."""

    sqrt_ratio: float
    free_threshold: float
    fixed_shrink: float
    switch_level: float = field(default=np.inf)

    @classmethod
    def from_problem(cls, prob: ProblemData, rho: float) -> "RegimeParams":
        l0, l2, m = prob.lambda0, prob.lambda2, prob.big_m
        ratio = np.sqrt(l0 / l2)
        if ratio <= m:
            a = 2.0 * np.sqrt(l0 * l2) / rho
            # free coordinates switch to the quadratic branch above this level
            switch = a + ratio
        else:
            a = l0 / (m * rho) + l2 * m / rho
            switch = np.inf
        return cls(float(ratio), float(a), float(rho / (rho + 2.0 * l2)), float(switch))


def box_soft_threshold(t, a, m):
    """Shrink ``t`` towards zero by ``a`` and clamp the result to ``[-m, m]``.

    Works elementwise on arrays; returns a float for scalar input.
    """
    t = np.asarray(t, dtype=float)
    out = np.sign(t) * np.minimum(np.maximum(np.abs(t) - a, 0.0), m)
    return float(out) if out.ndim == 0 else out


def psi_values(beta, mask0, mask1, prob: ProblemData) -> np.ndarray:
    """Elementwise perspective penalty; ``inf`` outside the box or on F0."""
    beta = np.asarray(beta, dtype=float)
    l0, l2, m = prob.lambda0, prob.lambda2, prob.big_m
    ab = np.abs(beta)
    ratio = np.sqrt(l0 / l2)
    quad = l0 + l2 * beta * beta
    if ratio <= m:
        free = np.where(ab >= ratio, quad, 2.0 * np.sqrt(l0 * l2) * ab)
    else:
        free = (l0 / m + l2 * m) * ab
    out = np.where(mask1, quad, free)
    out = np.where(mask0, np.where(beta == 0.0, 0.0, np.inf), out)
    return np.where(ab > m, np.inf, out)


def psi(i: int, beta_i: float, fix: Fixations, prob: ProblemData) -> float:
    """Perspective penalty of coordinate ``i`` at value ``beta_i``."""
    return float(psi_values(beta_i, i in fix.f0, i in fix.f1, prob))


def dual_h(x, prob: ProblemData):
    """Conjugate-type function of the F1 penalty, continuous and convex in x >= 0."""
    x = np.asarray(x, dtype=float)
    l0, l2, m = prob.lambda0, prob.lambda2, prob.big_m
    out = np.where(x <= 2.0 * m * l2, x * x / (4.0 * l2) - l0, m * x - l0 - l2 * m * m)
    return float(out) if out.ndim == 0 else out


def nu_values(x, mask0, mask1, prob: ProblemData) -> np.ndarray:
    """Elementwise dual penalty ``nu_i(x)`` for ``x = |X_i^T r|``."""
    x = np.asarray(x, dtype=float)
    l0, l2, m = prob.lambda0, prob.lambda2, prob.big_m
    h = dual_h(x, prob)
    if np.sqrt(l0 / l2) <= m:
        free = np.maximum(h, 0.0)
    else:
        free = np.maximum(m * x - l0 - l2 * m * m, 0.0)
    out = np.where(mask1, h, free)
    return np.where(mask0, 0.0, out)


def dual_nu(i: int, x: float, fix: Fixations, prob: ProblemData) -> float:
    return float(nu_values(x, i in fix.f0, i in fix.f1, prob))


def recover_zs_masked(beta, mask0, mask1, prob: ProblemData):
    """Optimal ``(z, s)`` of the relaxation for a fixed ``beta`` (mask form)."""
    beta = np.asarray(beta, dtype=float)
    if np.any(beta[mask0] != 0.0):
        bad = np.flatnonzero(mask0 & (beta != 0.0))
        raise InfeasibleFixation(f"coordinates {bad.tolist()} are fixed to zero but nonzero")
    ab = np.abs(beta)
    if prob.lambda0 > 0:
        z = np.maximum(ab / prob.big_m, np.sqrt(prob.lambda2 / prob.lambda0) * ab)
    else:
        # no cardinality cost: any nonzero coordinate takes z = 1
        z = np.where(ab > 0, 1.0, 0.0)
    z = np.clip(z, 0.0, 1.0)
    z = np.where(mask1, 1.0, np.where(mask0, 0.0, z))
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(z > 0, beta * beta / z, 0.0)
    return z, s


def recover_zs(beta, fix: Fixations, prob: ProblemData):
    mask0, mask1 = fix.masks(np.asarray(beta).shape[-1])
    return recover_zs_masked(beta, mask0, mask1, prob)


def relaxation_value(beta, mask0, mask1, prob: ProblemData) -> float:
    """Objective of the beta-only node relaxation."""
    beta = np.asarray(beta, dtype=float)
    r = prob.y - prob.X @ beta
    return float(0.5 * (r @ r) + psi_values(beta, mask0, mask1, prob).sum())
