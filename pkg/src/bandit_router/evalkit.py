"""Offline evaluation protocol for routing policies.

Costs are reported as dollars per 10,000 queries. Multi-run numbers follow
the five-seed protocol: per candidate scaling p, five models are trained with
seeds seed..seed+4 and the mean (with std) is reported. Calibration picks the
smallest p whose mean validation spend fits the user budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from decimal import Decimal
from pathlib import Path

import numpy as np

from .core import (
    Arm,
    RewardConfig,
    RoutingDataset,
    atomic_write_text,
    roster_fingerprint,
    token_cost,
)
from .errors import CompatibilityError, ConfigError, InfeasibleBudgetError, InputError
from .oracle import threshold_route
from .policy import PolicyModel, TrainConfig, check_compatible, predict_q, select_arm, train

REPORT_FORMAT = "frontier-report"
REPORT_VERSION = 1
_COST_PLACES = Decimal("0.000001")

# {0} plus a geometric ladder, four points per decade from 1e-4 to 1.
DEFAULT_P_GRID: tuple[float, ...] = (0.0,) + tuple(
    10 ** (-4 + 0.25 * i) for i in range(17)
)

CALIBRATION_RUNS = 5


@dataclass(frozen=True)
class BudgetSpec:
    """Dollar budget over a validation set, with optional relative slack."""

    budget: Decimal
    slack: float = 0.0

    def __post_init__(self) -> None:
        if self.budget < 0:
            raise ConfigError(f"budget must be >= 0, got {self.budget}")
        if self.slack < 0:
            raise ConfigError(f"slack must be >= 0, got {self.slack}")

    def ceiling(self) -> Decimal:
        return self.budget * (1 + Decimal(repr(self.slack)))


@dataclass
class EvalReport:
    """Cost/accuracy summary of routing a dataset, possibly over several runs."""

    p: float | None
    n_runs: int
    n_queries: int
    test_accuracy: float
    accuracy_mean_std: tuple[float, float]
    total_spend: Decimal
    test_cost_per_10k: Decimal
    selection_counts: list[tuple[int, int]]  # per arm: (chosen & correct, chosen & wrong)


def evaluate(model: PolicyModel, dataset: RoutingDataset) -> EvalReport:
    """Route every record with the model and tally accuracy, spend, selections."""
    check_compatible(model, dataset)
    counts = [[0, 0] for _ in dataset.arms]
    spend = Decimal(0)
    hits = 0
    for rec in dataset.records:
        j = select_arm(predict_q(model, rec.embedding), dataset.arms)
        bit = rec.correctness[j]
        hits += bit
        counts[j][0 if bit else 1] += 1
        spend += token_cost(dataset.arms[j].price_per_1k_tokens, rec.token_counts[j])
    return _single_run_report(
        p=model.train_config.reward.p,
        dataset=dataset,
        hits=hits,
        spend=spend,
        counts=counts,
    )


def single_arm_baseline(arm_id: int, dataset: RoutingDataset) -> EvalReport:
    """Report as if every query were routed to one fixed arm."""
    if not 0 <= arm_id < dataset.n_arms:
        raise InputError(f"arm_id {arm_id} outside roster of {dataset.n_arms}")
    counts = [[0, 0] for _ in dataset.arms]
    spend = Decimal(0)
    hits = 0
    arm = dataset.arms[arm_id]
    for rec in dataset.records:
        bit = rec.correctness[arm_id]
        hits += bit
        counts[arm_id][0 if bit else 1] += 1
        spend += token_cost(arm.price_per_1k_tokens, rec.token_counts[arm_id])
    return _single_run_report(p=None, dataset=dataset, hits=hits, spend=spend, counts=counts)


def aggregate_reports(reports: list[EvalReport], p: float | None = None) -> EvalReport:
    """Combine per-run reports into one: mean cost/accuracy, summed selections."""
    if not reports:
        raise InputError("nothing to aggregate")
    n_queries = reports[0].n_queries
    if any(r.n_queries != n_queries for r in reports):
        raise InputError("cannot aggregate reports over differently sized datasets")
    accs = [r.test_accuracy for r in reports]
    mean = sum(accs) / len(accs)
    std = math.sqrt(sum((a - mean) ** 2 for a in accs) / len(accs))
    spend = sum((r.total_spend for r in reports), Decimal(0)) / len(reports)
    per10k = sum((r.test_cost_per_10k for r in reports), Decimal(0)) / len(reports)
    counts = [
        (
            sum(r.selection_counts[j][0] for r in reports),
            sum(r.selection_counts[j][1] for r in reports),
        )
        for j in range(len(reports[0].selection_counts))
    ]
    return EvalReport(
        p=p if p is not None else reports[0].p,
        n_runs=sum(r.n_runs for r in reports),
        n_queries=n_queries,
        test_accuracy=mean,
        accuracy_mean_std=(mean, std),
        total_spend=spend,
        test_cost_per_10k=per10k,
        selection_counts=counts,
    )


def train_runs(
    dataset: RoutingDataset, config: TrainConfig, p: float, n_runs: int = CALIBRATION_RUNS
) -> list[PolicyModel]:
    """The n-seed protocol: identical config except seed = seed..seed+n-1."""
    reward = RewardConfig(p=p, cost_mode=config.reward.cost_mode)
    return [
        train(dataset, replace(config, seed=config.seed + run, reward=reward))
        for run in range(n_runs)
    ]


def calibrate_p(
    train_set: RoutingDataset,
    val_set: RoutingDataset,
    budget: BudgetSpec,
    config: TrainConfig,
    p_grid: tuple[float, ...] = DEFAULT_P_GRID,
) -> tuple[float, list[PolicyModel]]:
    """Smallest grid p whose mean validation spend fits the budget.

    Candidates are tried in ascending order so the first fit is the answer.
    If nothing fits, raises InfeasibleBudgetError naming the cheapest mean
    validation spend any candidate achieved.
    """
    if not p_grid:
        raise ConfigError("empty p grid")
    check_datasets_compatible(train_set, val_set)
    ceiling = budget.ceiling()
    cheapest: Decimal | None = None
    for p in sorted(p_grid):
        models = train_runs(train_set, config, p)
        costs = [evaluate(m, val_set).total_spend for m in models]
        mean_cost = sum(costs, Decimal(0)) / len(costs)
        if cheapest is None or mean_cost < cheapest:
            cheapest = mean_cost
        if mean_cost <= ceiling:
            return p, models
    raise InfeasibleBudgetError(
        f"no scaling in the grid meets budget {budget.budget}; "
        f"cheapest achievable validation cost is {cheapest}",
        cheapest_achievable=cheapest,
    )


def heterogeneity_matrix(dataset: RoutingDataset) -> np.ndarray:
    """H[i][j] = number of records arm i answers correctly and arm j does not."""
    if not dataset.records:
        raise InputError("heterogeneity matrix needs a non-empty dataset")
    a = dataset.accuracy_matrix()
    return a.T @ (1 - a)


def frontier_sweep(
    train_set: RoutingDataset,
    test_set: RoutingDataset,
    p_grid: tuple[float, ...],
    config: TrainConfig,
) -> list[EvalReport]:
    """Cost/accuracy trade-off rows, one per grid p, sorted by p descending."""
    if not p_grid:
        raise ConfigError("empty p grid")
    check_datasets_compatible(train_set, test_set)
    rows = []
    for p in sorted(p_grid, reverse=True):
        models = train_runs(train_set, config, p)
        rows.append(aggregate_reports([evaluate(m, test_set) for m in models], p=p))
    return rows


def oracle_frontier(
    dataset: RoutingDataset, p_grid: tuple[float, ...]
) -> list[EvalReport]:
    """Frontier of the threshold oracle (true bits, normalized costs) on a dataset."""
    if not p_grid:
        raise ConfigError("empty p grid")
    norm_costs = [a.normalized_cost for a in dataset.arms]
    rows = []
    for p in sorted(p_grid, reverse=True):
        counts = [[0, 0] for _ in dataset.arms]
        spend = Decimal(0)
        hits = 0
        for rec in dataset.records:
            j = threshold_route(rec.correctness, norm_costs, p)
            bit = rec.correctness[j]
            hits += bit
            counts[j][0 if bit else 1] += 1
            spend += token_cost(dataset.arms[j].price_per_1k_tokens, rec.token_counts[j])
        rows.append(
            _single_run_report(p=p, dataset=dataset, hits=hits, spend=spend, counts=counts)
        )
    return rows


def check_datasets_compatible(a: RoutingDataset, b: RoutingDataset) -> None:
    """Datasets used together must share roster, dimension, and encoder."""
    if a.embedding_dim != b.embedding_dim:
        raise CompatibilityError(
            f"embedding dims differ: {a.embedding_dim} vs {b.embedding_dim}"
        )
    if roster_fingerprint(a.arms) != roster_fingerprint(b.arms):
        raise CompatibilityError("arm rosters differ between datasets")
    if a.encoder is not None and b.encoder is not None and a.encoder != b.encoder:
        raise CompatibilityError(
            f"datasets were embedded with different encoders: {a.encoder!r} vs {b.encoder!r}"
        )


def write_frontier_report(
    path: str | Path, rows: list[EvalReport], arms: list[Arm]
) -> None:
    """Delimiter-separated report with a stable column order.

    Columns: p, cost_per_10k, acc_mean, acc_std, then per-arm selection counts
    split by correctness.
    """
    header = ["p", "cost_per_10k", "acc_mean", "acc_std"]
    for arm in arms:
        header += [f"sel_correct:{arm.name}", f"sel_incorrect:{arm.name}"]
    lines = ["\t".join(header)]
    for row in rows:
        cells = [
            repr(row.p) if row.p is not None else "",
            str(row.test_cost_per_10k.quantize(_COST_PLACES)),
            repr(row.accuracy_mean_std[0]),
            repr(row.accuracy_mean_std[1]),
        ]
        for correct, wrong in row.selection_counts:
            cells += [str(correct), str(wrong)]
        lines.append("\t".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def report_to_dict(row: EvalReport) -> dict:
    return {
        "p": row.p,
        "n_runs": row.n_runs,
        "n_queries": row.n_queries,
        "accuracy": row.test_accuracy,
        "accuracy_mean": row.accuracy_mean_std[0],
        "accuracy_std": row.accuracy_mean_std[1],
        "total_spend": str(row.total_spend),
        "cost_per_10k": str(row.test_cost_per_10k.quantize(_COST_PLACES)),
        "selection_counts": [list(c) for c in row.selection_counts],
    }


def _single_run_report(
    p: float | None,
    dataset: RoutingDataset,
    hits: int,
    spend: Decimal,
    counts: list[list[int]],
) -> EvalReport:
    n = len(dataset.records)
    accuracy = hits / n if n else 0.0
    per10k = spend * 10000 / n if n else Decimal(0)
    return EvalReport(
        p=p,
        n_runs=1,
        n_queries=n,
        test_accuracy=accuracy,
        accuracy_mean_std=(accuracy, 0.0),
        total_spend=spend,
        test_cost_per_10k=per10k,
        selection_counts=[tuple(c) for c in counts],
    )
