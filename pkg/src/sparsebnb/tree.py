"""Best-first branch-and-bound with synchronous batch rounds.

Each round pops up to K open nodes with the smallest lower bounds, solves
their relaxations together (warm-started from the parent's iterates),
computes feasible solutions for the survivors on their rounded supports,
then prunes or branches every node against the updated incumbent.
"""
from __future__ import annotations

import heapq
import math
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np

from .admm import AdmmBatch, AdmmOptions, AdmmState, RelaxationResult, solve_relaxation_batch, warm_start_child
from .core import Fixations, ProblemData
from .exceptions import NoFractional
from .matching_pursuit import MpOptions, run_matching_pursuit
from .precompute import Precomputed, build_precomputed
from .upper_bound import FeasibleSolution, FpgOptions, SupportBatch, fpg_solve, fpg_solve_batch, round_support


class Status(str, Enum):
    OPTIMAL = "Optimal"
    GAP_REACHED = "GapReached"
    TIME_LIMIT = "TimeLimit"
    NODE_LIMIT = "NodeLimit"
    CANCELLED = "Cancelled"


@dataclass
class Node:
    fix: Fixations
    lb: float
    depth: int
    id: int
    warm: Optional[AdmmState] = None

    def sort_key(self) -> Tuple[float, int]:
        return (self.lb, self.id)


@dataclass
class BnbOptions:
    batch_size: int = 1
    gap_tol: float = 1e-2
    time_limit: float = math.inf
    node_limit: int | None = None
    rho: float = 1.0
    int_tol: float = 1e-4
    prune_rtol: float = 1e-12
    warm_start: bool = True
    max_warm_states: int = 10_000
    admm: AdmmOptions = field(default_factory=AdmmOptions)
    fpg: FpgOptions = field(default_factory=FpgOptions)
    mp: MpOptions = field(default_factory=MpOptions)
    polish_tol: float = 1e-12


@dataclass
class SolveReport:
    best_objective: float
    best_beta: np.ndarray
    best_support: Tuple[int, ...]
    global_lb: float
    gap: float
    nodes_solved: int
    wall_time: float
    status: Status
    rounds: int = 0
    max_depth: int = 0

    @property
    def upper_bound(self) -> float:
        return self.best_objective

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.best_beta))


def relative_gap(ub: float, lb: float) -> float:
    """``(UB - LB) / UB``, or the absolute difference when ``UB <= 0``."""
    if ub > 0:
        return (ub - lb) / ub
    return ub - lb


class OpenNodes:
    """Priority queue of open nodes ordered by (lower bound, id)."""

    def __init__(self):
        self._heap: List[Tuple[float, int, Node]] = []

    def push(self, node: Node):
        heapq.heappush(self._heap, (node.lb, node.id, node))

    def pop(self) -> Node:
        return heapq.heappop(self._heap)[2]

    def min_lb(self) -> float:
        return self._heap[0][0] if self._heap else math.inf

    def __len__(self):
        return len(self._heap)


def select_batch(open_nodes: OpenNodes, K: int) -> List[Node]:
    """Pop the ``min(K, len(open_nodes))`` nodes with the smallest bounds."""
    if K < 1:
        raise ValueError(f"batch size must be >= 1, got {K}")
    return [open_nodes.pop() for _ in range(min(K, len(open_nodes)))]


def branch_variable(result: RelaxationResult, fix: Fixations, int_tol: float = 1e-4) -> int:
    """Most fractional free coordinate; ties by larger ``|beta|``, then index."""
    z = result.z_hat
    free = fix.free(z.size)
    frac = np.minimum(z[free], 1.0 - z[free])
    cand = free[frac > int_tol]
    if cand.size == 0:
        raise NoFractional("all free coordinates are integral")
    return _most_fractional(cand, z, result.beta_hat)


def _most_fractional(cand: np.ndarray, z: np.ndarray, beta: np.ndarray) -> int:
    frac = np.minimum(z[cand], 1.0 - z[cand])
    # lexsort: last key is primary
    order = np.lexsort((cand, -np.abs(beta[cand]), -frac))
    return int(cand[order[0]])


def is_integral(z: np.ndarray, fix: Fixations, int_tol: float) -> bool:
    free = fix.free(z.size)
    return bool(np.all(np.minimum(z[free], 1.0 - z[free]) <= int_tol))


def solve(
    prob: ProblemData,
    opts: BnbOptions | None = None,
    progress: Optional[Callable[[dict], None]] = None,
    cancel: Optional[Callable[[], bool]] = None,
    trace: Optional[Callable[[str, Node, float, float], None]] = None,
    pre: Precomputed | None = None,
) -> SolveReport:
    """Certify a global optimum of the l0-l2 problem to relative gap ``opts.gap_tol``.

    ``progress`` receives a dict per round (iter, ub, lb, gap, nodes, open).
    ``cancel`` is polled between rounds. ``trace(event, node, lb_u, ub)`` is
    called for every processed node with event one of ``prune_inherited``,
    ``prune_bound``, ``prune_integral``, ``leaf`` or ``branch``.
    """
    opts = opts or BnbOptions()
    t0 = time.perf_counter()
    p = prob.p
    if pre is None:
        pre = build_precomputed(prob, opts.rho)

    best = run_matching_pursuit(prob, opts.mp)
    ub = best.objective

    open_nodes = OpenNodes()
    open_nodes.push(Node(Fixations(), -math.inf, 0, 0))
    next_id = 1
    warm_owners: deque = deque()
    closed_floor = math.inf
    global_lb = -math.inf
    nodes_solved = 0
    rounds = 0
    max_depth = 0
    status = None
    seen_supports: set = set()

    def threshold():
        return ub - opts.prune_rtol * abs(ub)

    def emit(event, node, lb_u):
        if trace is not None:
            trace(event, node, lb_u, ub)

    while len(open_nodes):
        global_lb = max(global_lb, min(open_nodes.min_lb(), closed_floor))
        if relative_gap(ub, global_lb) <= opts.gap_tol:
            status = Status.GAP_REACHED
            break
        if time.perf_counter() - t0 >= opts.time_limit:
            status = Status.TIME_LIMIT
            break
        if opts.node_limit is not None and nodes_solved >= opts.node_limit:
            status = Status.NODE_LIMIT
            break
        if cancel is not None and cancel():
            status = Status.CANCELLED
            break

        batch_nodes = []
        for node in select_batch(open_nodes, opts.batch_size):
            if node.lb >= threshold():
                emit("prune_inherited", node, node.lb)
                continue
            batch_nodes.append(node)
        if not batch_nodes:
            continue

        states = []
        for node in batch_nodes:
            if opts.warm_start and node.warm is not None:
                states.append(warm_start_child(node.warm, node.fix, pre))
            else:
                states.append(None)
        batch = AdmmBatch.build([n.fix for n in batch_nodes], p, states, [n.id for n in batch_nodes])
        results = solve_relaxation_batch(batch, pre, prob, [n.lb for n in batch_nodes], opts.admm)
        nodes_solved += len(batch_nodes)
        rounds += 1

        # feasible solutions for nodes the incumbent cannot already prune
        supports, init = [], []
        for node, res in zip(batch_nodes, results):
            if res.lower_bound >= threshold():
                continue
            S = round_support(res.z_hat, node.fix)
            if S in seen_supports:
                continue
            seen_supports.add(S)
            supports.append(S)
            init.append(best.beta)
        if supports:
            sols = fpg_solve_batch(SupportBatch.build(supports, prob, init), prob, opts.fpg)
            for sol in sols:
                if sol.objective < ub:
                    ub, best = sol.objective, sol

        for node, res in zip(batch_nodes, results):
            lb_u = res.lower_bound
            if lb_u >= threshold():
                emit("prune_bound", node, lb_u)
                continue
            free = node.fix.free(p)
            if free.size == 0:
                closed_floor = min(closed_floor, lb_u)
                emit("leaf", node, lb_u)
                continue
            if is_integral(res.z_hat, node.fix, opts.int_tol):
                # the node primal is itself feasible; the support re-fit above is usually better
                S = tuple(int(i) for i in np.flatnonzero(res.beta_hat))
                obj = prob.objective(res.beta_hat, S)
                if obj < ub:
                    ub, best = obj, FeasibleSolution(res.beta_hat.copy(), S, obj)
                closed_floor = min(closed_floor, lb_u)
                emit("prune_integral", node, lb_u)
                continue
            try:
                j = branch_variable(res, node.fix, opts.int_tol)
            except NoFractional:
                j = _most_fractional(free, res.z_hat, res.beta_hat)
            emit("branch", node, lb_u)
            warm = res.state if opts.warm_start else None
            children = []
            for child_fix in (node.fix.fix_zero(j), node.fix.fix_one(j)):
                child = Node(child_fix, lb_u, node.depth + 1, next_id, warm)
                next_id += 1
                open_nodes.push(child)
                children.append(child)
            max_depth = max(max_depth, node.depth + 1)
            if warm is not None:
                # both children share one parent state; the oldest are dropped first
                warm_owners.append(children)
                while len(warm_owners) > opts.max_warm_states:
                    for old in warm_owners.popleft():
                        old.warm = None

        if progress is not None:
            lb_now = max(global_lb, min(open_nodes.min_lb(), closed_floor))
            progress(
                {
                    "iter": rounds,
                    "ub": ub,
                    "lb": lb_now,
                    "gap": relative_gap(ub, lb_now),
                    "nodes": nodes_solved,
                    "open": len(open_nodes),
                }
            )

    if status is None:
        status = Status.OPTIMAL

    polished = fpg_solve(best.support, prob, None, FpgOptions(tol=opts.polish_tol, max_iters=50_000))
    if polished.objective <= best.objective + 1e-9 * max(1.0, abs(best.objective)):
        best = polished
    ub = best.objective

    if status is Status.OPTIMAL:
        global_lb, gap = ub, 0.0
    else:
        global_lb = min(global_lb, ub)
        gap = relative_gap(ub, global_lb)
        if gap <= 0:
            status = Status.OPTIMAL if not len(open_nodes) else status

    return SolveReport(
        best_objective=ub,
        best_beta=best.beta,
        best_support=tuple(best.support),
        global_lb=global_lb,
        gap=gap,
        nodes_solved=nodes_solved,
        wall_time=time.perf_counter() - t0,
        status=status,
        rounds=rounds,
        max_depth=max_depth,
    )
