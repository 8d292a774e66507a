"""Ground-truth budgeted routing.

Given the true per-query accuracy bits, the budgeted assignment problem is:
maximize total accuracy subject to total dollar cost <= budget. Two solvers:

* brute_force_ilp — exact enumeration of every assignment, guarded to test
  scale. The reference the scalar solver is measured against.
* solve_budgeted — the production-scale route: a single cost scaling p turns
  the constrained problem into per-query threshold routing
  argmax_j a_j - p*c_j, and bisection finds the smallest p whose routed cost
  fits the budget. Exact up to tie boundaries, with a (rare, quantifiable)
  integrality gap versus the enumeration.

Both respect the shared tie rule (cheaper arm, then lower index), which makes
the chosen cost non-increasing in p for every fixed query.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import argmax_preferring_cheap
from .errors import InfeasibleBudgetError, InputError, InstanceTooLargeError

BRUTE_FORCE_LIMIT = 10**7
DUAL_TOLERANCE = 1e-9
BISECTION_ITERATIONS = 64


@dataclass
class BudgetProblem:
    """Accuracy bits, per-query arm costs, and a total budget in dollars.

    costs may be a length-k vector (every query pays the same per arm) or an
    (N, k) matrix of per-query costs.
    """

    accuracy: np.ndarray
    costs: np.ndarray
    budget: float

    def __post_init__(self) -> None:
        self.accuracy = np.asarray(self.accuracy, dtype=np.float64)
        self.costs = np.asarray(self.costs, dtype=np.float64)
        if self.accuracy.ndim != 2 or self.accuracy.shape[0] < 1 or self.accuracy.shape[1] < 1:
            raise InputError(f"accuracy must be an N x k matrix, got shape {self.accuracy.shape}")
        n, k = self.accuracy.shape
        if self.costs.shape not in ((k,), (n, k)):
            raise InputError(
                f"costs must have shape ({k},) or ({n}, {k}), got {self.costs.shape}"
            )
        if self.budget < 0:
            raise InputError(f"budget must be >= 0, got {self.budget}")

    @property
    def n_queries(self) -> int:
        return self.accuracy.shape[0]

    @property
    def n_arms(self) -> int:
        return self.accuracy.shape[1]

    def cost_matrix(self) -> np.ndarray:
        """Costs broadcast to full (N, k) shape."""
        if self.costs.ndim == 1:
            return np.broadcast_to(self.costs, self.accuracy.shape)
        return self.costs


@dataclass
class DualCertificate:
    """Candidate dual variables: one scalar cost scaling p and one q per query."""

    p: float
    q: np.ndarray


@dataclass
class IlpSolution:
    assignment: tuple[int, ...]
    total_accuracy: float
    total_cost: float
    feasible: bool


@dataclass
class ThresholdSolution:
    p_star: float
    assignment: tuple[int, ...]
    total_accuracy: float
    total_cost: float


def threshold_route(
    accuracies: Sequence[float], costs: Sequence[float], p: float
) -> int:
    """Single-query optimal arm under cost scaling p: argmax a_j - p*c_j."""
    if len(accuracies) != len(costs):
        raise InputError(
            f"accuracies ({len(accuracies)}) and costs ({len(costs)}) differ in length"
        )
    scores = [a - p * c for a, c in zip(accuracies, costs)]
    return argmax_preferring_cheap(scores, list(costs))


def route_all(problem: BudgetProblem, p: float) -> np.ndarray:
    """Threshold-route every query of the problem at scaling p."""
    cost = problem.cost_matrix()
    n = problem.n_queries
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = threshold_route(problem.accuracy[i], cost[i], p)
    return out


def assignment_totals(problem: BudgetProblem, assignment: np.ndarray) -> tuple[float, float]:
    """(total accuracy, total cost) of a full assignment."""
    cost = problem.cost_matrix()
    rows = np.arange(problem.n_queries)
    acc = float(problem.accuracy[rows, assignment].sum())
    spend = float(cost[rows, assignment].sum())
    return acc, spend


def brute_force_ilp(problem: BudgetProblem, chunk: int = 1 << 14) -> IlpSolution:
    """Exact maximum-accuracy assignment by enumerating all k^N choices.

    Among accuracy maximizers the cheapest wins; remaining ties go to the
    lexicographically smallest assignment. Budgets below the all-cheapest
    cost return that assignment flagged infeasible.
    """
    n, k = problem.n_queries, problem.n_arms
    total = k**n
    if total > BRUTE_FORCE_LIMIT:
        raise InstanceTooLargeError(
            f"{k}^{n} = {total} assignments exceeds the enumeration guard ({BRUTE_FORCE_LIMIT})"
        )
    cost = problem.cost_matrix()
    cheapest = np.argmin(cost, axis=1)
    min_cost = float(cost[np.arange(n), cheapest].sum())
    if problem.budget < min_cost:
        acc, spend = assignment_totals(problem, cheapest)
        return IlpSolution(tuple(int(j) for j in cheapest), acc, spend, feasible=False)

    place = k ** (n - 1 - np.arange(n))  # most-significant digit first
    best_key: tuple[float, float] | None = None
    best_assignment: np.ndarray | None = None
    for lo in range(0, total, chunk):
        ids = np.arange(lo, min(lo + chunk, total))
        assign = (ids[:, None] // place[None, :]) % k
        acc_tot = np.zeros(len(ids))
        cost_tot = np.zeros(len(ids))
        for i in range(n):
            acc_tot += problem.accuracy[i, assign[:, i]]
            cost_tot += cost[i, assign[:, i]]
        feasible = cost_tot <= problem.budget
        if not feasible.any():
            continue
        idx = np.flatnonzero(feasible)
        # lexsort: last key is primary. Highest accuracy, then lowest cost,
        # then smallest assignment (enumeration order is already lexicographic,
        # so the first index among (acc, cost) ties is the lex-min).
        order = np.lexsort((idx, cost_tot[idx], -acc_tot[idx]))
        cand = idx[order[0]]
        key = (-acc_tot[cand], cost_tot[cand])
        if best_key is None or key < best_key:
            best_key = key
            best_assignment = assign[cand].copy()
    assert best_assignment is not None  # feasibility guaranteed above
    acc, spend = assignment_totals(problem, best_assignment)
    return IlpSolution(tuple(int(j) for j in best_assignment), acc, spend, feasible=True)


def solve_budgeted(problem: BudgetProblem) -> ThresholdSolution:
    """Smallest cost scaling whose threshold routing fits the budget.

    Bisection over p: routed cost is a non-increasing step function of p, so
    the returned assignment always satisfies the budget. Raises
    InfeasibleBudgetError when even all-cheapest routing exceeds it.
    """
    cost = problem.cost_matrix()
    min_total = float(cost.min(axis=1).sum())
    if problem.budget < min_total:
        raise InfeasibleBudgetError(
            f"budget {problem.budget} is below the cheapest possible cost {min_total}",
            cheapest_achievable=min_total,
        )
    assignment = route_all(problem, 0.0)
    acc, spend = assignment_totals(problem, assignment)
    if spend <= problem.budget:
        return ThresholdSolution(0.0, tuple(int(j) for j in assignment), acc, spend)

    hi = _p_ceiling(problem.accuracy, cost)
    lo = 0.0
    for _ in range(BISECTION_ITERATIONS):
        mid = 0.5 * (lo + hi)
        mid_assignment = route_all(problem, mid)
        _, mid_spend = assignment_totals(problem, mid_assignment)
        if mid_spend <= problem.budget:
            hi = mid
        else:
            lo = mid
    assignment = route_all(problem, hi)
    acc, spend = assignment_totals(problem, assignment)
    return ThresholdSolution(hi, tuple(int(j) for j in assignment), acc, spend)


def check_dual_feasibility(problem: BudgetProblem, cert: DualCertificate) -> bool:
    """Whether p*c_j + q_i >= a_j(x_i) + 1 holds for every (query, arm)."""
    q = np.asarray(cert.q, dtype=np.float64)
    if q.shape != (problem.n_queries,):
        raise InputError(f"q must have length {problem.n_queries}, got shape {q.shape}")
    lhs = cert.p * problem.cost_matrix() + q[:, None]
    rhs = problem.accuracy + 1.0
    return bool(np.all(lhs >= rhs - DUAL_TOLERANCE))


def certificate_from_p(problem: BudgetProblem, p: float) -> DualCertificate:
    """Tightest feasible q for a given p: q_i = max_j a_j(x_i) + 1 - p*c_j."""
    slack = problem.accuracy + 1.0 - p * problem.cost_matrix()
    return DualCertificate(p=p, q=slack.max(axis=1))


def _p_ceiling(accuracy: np.ndarray, cost: np.ndarray) -> float:
    """A scaling beyond which every query routes to its cheapest arm.

    Needs the smallest positive cost *difference*, not the smallest cost:
    the dearer of two arms stays ahead until p exceeds their accuracy gap
    divided by their cost gap.
    """
    spread = float(accuracy.max() - accuracy.min()) if accuracy.size else 0.0
    min_diff = np.inf
    for row in cost:
        vals = np.sort(np.unique(row))
        if len(vals) > 1:
            min_diff = min(min_diff, float(np.diff(vals).min()))
    if not np.isfinite(min_diff):
        # All arms cost the same on every query; p cannot change the routing.
        return 1.0
    return spread / min_diff + 1.0
