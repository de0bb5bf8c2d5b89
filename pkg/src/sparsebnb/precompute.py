"""Tree-wide precomputation of ``D = (X^T X + rho I)^-1`` and ``c = X^T y``.

D does not depend on branching decisions, so one :class:`Precomputed` is
built per solve and shared read-only by every node.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg

from .core import ProblemData
from .exceptions import NumericalFailure


def _cholesky(A):
    try:
        return linalg.cho_factor(A, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericalFailure(f"matrix of order {A.shape[0]} is not positive definite") from exc


@dataclass(frozen=True, eq=False)
class Precomputed:
    """Shared linear-algebra state for the ADMM b-update.

    When ``p > n`` the inverse is kept in Woodbury form
    ``D = (I - X^T (X X^T + rho I)^-1 X) / rho``, and ``apply`` costs
    two ``n x p`` products instead of one ``p x p`` product. The dense ``D``
    is materialized on first access either way.
    """

    X: np.ndarray
    c: np.ndarray
    rho: float
    col_sq_norms: np.ndarray
    _dense: np.ndarray | None = None
    _inner: tuple | None = None

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def woodbury(self) -> bool:
        return self._inner is not None

    @cached_property
    def D(self) -> np.ndarray:
        if self._dense is not None:
            return self._dense
        X, rho = self.X, self.rho
        D = (np.eye(self.p) - X.T @ linalg.cho_solve(self._inner, X, check_finite=False)) / rho
        D = 0.5 * (D + D.T)
        D.setflags(write=False)
        return D

    def apply(self, W: np.ndarray) -> np.ndarray:
        """Row-wise product ``W @ D`` for a vector or a ``K x p`` matrix."""
        if self._inner is None:
            return W @ self._dense
        X, rho = self.X, self.rho
        # D is symmetric, so W @ D == (D @ W.T).T
        T = linalg.cho_solve(self._inner, X @ np.atleast_2d(W).T, check_finite=False)
        out = (np.atleast_2d(W) - (X.T @ T).T) / rho
        return out.reshape(W.shape)


def build_precomputed(prob: ProblemData, rho: float = 1.0, woodbury: bool | None = None) -> Precomputed:
    """Factor the b-update system once for the whole tree.

    ``woodbury=None`` picks the Woodbury route exactly when ``p > n``.
    """
    if not rho > 0:
        raise ValueError(f"rho must be > 0, got {rho}")
    X = prob.X
    n, p = X.shape
    if woodbury is None:
        woodbury = p > n
    c = prob.Xty.copy()
    c.setflags(write=False)
    if woodbury:
        inner = _cholesky(X @ X.T + rho * np.eye(n))
        return Precomputed(X, c, float(rho), prob.col_sq_norms, _inner=inner)
    factor = _cholesky(X.T @ X + rho * np.eye(p))
    D = linalg.cho_solve(factor, np.eye(p), check_finite=False)
    D = 0.5 * (D + D.T)
    D.setflags(write=False)
    return Precomputed(X, c, float(rho), prob.col_sq_norms, _dense=D)
