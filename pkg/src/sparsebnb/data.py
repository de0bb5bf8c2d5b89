"""Synthetic instances, ridge tuning, CSV ingestion and report files."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np

from .core import ProblemData
from .exceptions import DimensionMismatch, InvalidSpec, ParseError

LAMBDA2_GRID = np.logspace(-4, 4, 100)


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    p: int
    k0: int
    corr: float = 0.0
    snr: float = 10.0
    seed: int = 0

    def validate(self):
        if self.n < 1 or self.p < 1:
            raise InvalidSpec(f"n and p must be positive, got n={self.n}, p={self.p}")
        if not 0 <= self.k0 <= self.p:
            raise InvalidSpec(f"k0 must lie in [0, p], got {self.k0}")
        if not 0.0 <= self.corr < 1.0:
            raise InvalidSpec(f"corr must lie in [0, 1), got {self.corr}")
        if not self.snr > 0:
            raise InvalidSpec(f"snr must be positive, got {self.snr}")


@dataclass(frozen=True)
class Instance:
    X: np.ndarray
    y: np.ndarray
    beta_true: np.ndarray
    sigma: float

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.beta_true))

    def problem(self, lambda0: float, lambda2: float, big_m: float) -> ProblemData:
        return ProblemData(self.X, self.y, lambda0, lambda2, big_m)


def true_support(p: int, k0: int) -> np.ndarray:
    """``k0`` equispaced indices in ``[0, p)`` starting at 0."""
    if k0 == 0:
        return np.zeros(0, dtype=int)
    return (np.arange(k0) * p) // k0


def generate(spec: SyntheticSpec) -> Instance:
    """Gaussian design with equicorrelated features and a planted sparse signal.

    Rows are ``sqrt(corr)*g + sqrt(1-corr)*e`` with a per-row scalar ``g``,
    which has covariance ``corr*11^T + (1-corr)I``. The noise level is set
    from the empirical variance of ``X beta`` so the SNR holds exactly.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    g = rng.standard_normal((spec.n, 1))
    E = rng.standard_normal((spec.n, spec.p))
    X = math.sqrt(spec.corr) * g + math.sqrt(1.0 - spec.corr) * E
    beta = np.zeros(spec.p)
    beta[true_support(spec.p, spec.k0)] = 1.0
    signal = X @ beta
    var = float(np.var(signal))
    sigma = math.sqrt(var / spec.snr)
    y = signal + sigma * rng.standard_normal(spec.n)
    return Instance(X, y, beta, sigma)


def restricted_ridge(X: np.ndarray, y: np.ndarray, support, lambda2: float) -> np.ndarray:
    """Minimizer of ``0.5||y - X_S b||^2 + lambda2||b||^2`` with zeros off ``S``."""
    S = np.asarray(support, dtype=int)
    beta = np.zeros(X.shape[1])
    if S.size:
        XS = X[:, S]
        beta[S] = np.linalg.solve(XS.T @ XS + 2.0 * lambda2 * np.eye(S.size), XS.T @ y)
    return beta


def tune_lambda2(inst: Instance, grid: np.ndarray = LAMBDA2_GRID) -> float:
    """Grid value whose support-restricted ridge fit is closest to ``beta_true``.

    ``np.argmin`` returns the first minimum, so ties go to the smaller value.
    """
    S = inst.support
    XS = inst.X[:, list(S)]
    G, c = XS.T @ XS, XS.T @ inst.y
    errs = np.empty(len(grid))
    for i, lam in enumerate(grid):
        b = np.linalg.solve(G + 2.0 * lam * np.eye(len(S)), c) if S else np.zeros(0)
        errs[i] = np.linalg.norm(inst.beta_true[list(S)] - b)
    return float(grid[int(np.argmin(errs))])


def default_big_m(inst: Instance, lambda2: float, factor: float = 1.5) -> float:
    """``factor * ||beta(lambda2)||_inf`` of the support-restricted ridge fit."""
    b = restricted_ridge(inst.X, inst.y, inst.support, lambda2)
    m = factor * float(np.abs(b).max(initial=0.0))
    return m if m > 0 else 1.0


def lambda0_grid(X: np.ndarray, y: np.ndarray, lambda2: float, num: int = 20, ratio: float = 1e-3) -> np.ndarray:
    """Geometric grid of ``lambda0`` values, decreasing from a level that empties the support.

    The top value is the largest single-coordinate gain
    ``(x_j^T y)^2 / (2(||x_j||^2 + 2 lambda2))``; above it no one-feature model
    beats ``beta = 0``.
    """
    d = np.einsum("ij,ij->j", X, X) + 2.0 * lambda2
    top = float(np.max((X.T @ y) ** 2 / (2.0 * d)))
    return np.geomspace(top, top * ratio, num)


def _read_matrix(path, what: str) -> np.ndarray:
    rows = []
    width = None
    try:
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or all(not cell.strip() for cell in row):
                    continue
                if width is None:
                    width = len(row)
                elif len(row) != width:
                    raise ParseError(f"{what}: row {lineno} has {len(row)} fields, expected {width}")
                vals = []
                for col, cell in enumerate(row, start=1):
                    try:
                        vals.append(float(cell))
                    except ValueError:
                        raise ParseError(f"{what}: row {lineno}, column {col}: not a number: {cell!r}") from None
                rows.append(vals)
    except OSError as exc:
        raise ParseError(f"{what}: cannot read {path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{what}: {path} contains no data")
    return np.array(rows, dtype=float)


def load_csv(path_x, path_y, center: bool = False, normalize: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Read ``X`` (n rows, p columns) and ``y`` (n values) from headerless CSV.

    ``center`` removes column means of X and the mean of y; ``normalize``
    scales every nonzero column of X to unit Euclidean norm.
    """
    X = _read_matrix(path_x, "X")
    Y = _read_matrix(path_y, "y")
    if Y.shape[1] == 1:
        y = Y[:, 0]
    elif Y.shape[0] == 1:
        y = Y[0]
    else:
        raise DimensionMismatch(f"y must be a single row or column, got shape {Y.shape}")
    if y.size != X.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[0]} rows but y has {y.size} values")
    if center:
        X = X - X.mean(axis=0)
        y = y - y.mean()
    if normalize:
        norms = np.linalg.norm(X, axis=0)
        X = X / np.where(norms > 0, norms, 1.0)
    return X, y


def save_csv(path, arr: np.ndarray):
    arr = np.atleast_1d(arr)
    fmt = "%.17g"
    np.savetxt(path, arr if arr.ndim == 2 else arr[:, None], delimiter=",", fmt=fmt)


REPORT_FIELDS = (
    "status",
    "objective",
    "lower_bound",
    "gap",
    "support",
    "beta",
    "nodes",
    "rounds",
    "wall_time",
    "config",
)


def report_dict(report, config: Optional[Mapping[str, Any]] = None, wall_time: bool = True) -> Dict[str, Any]:
    """Fixed-order mapping of a solve report; floats keep their exact repr."""
    sup = [int(i) for i in np.flatnonzero(report.best_beta)]
    out = {
        "status": str(report.status.value if hasattr(report.status, "value") else report.status),
        "objective": float(report.best_objective),
        "lower_bound": float(report.global_lb),
        "gap": float(report.gap),
        "support": sup,
        "beta": [float(report.best_beta[i]) for i in sup],
        "nodes": int(report.nodes_solved),
        "rounds": int(getattr(report, "rounds", 0)),
        "wall_time": float(report.wall_time) if wall_time else None,
        "config": dict(config or {}),
    }
    return {k: out[k] for k in REPORT_FIELDS}


def write_report(report, path, config: Optional[Mapping[str, Any]] = None, wall_time: bool = True):
    """Write the report as JSON; ``wall_time=False`` makes the file reproducible byte for byte."""
    text = json.dumps(report_dict(report, config, wall_time), indent=2, sort_keys=False)
    Path(path).write_text(text + "\n")


def read_report(path) -> Dict[str, Any]:
    return json.loads(Path(path).read_text())
