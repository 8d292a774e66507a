"""Cost-aware LLM routing via a contextual bandit.

Train a per-arm linear reward model on cached (query, arm) outcomes, route
each query to the arm with the highest expected reward minus a scaled cost,
and evaluate against an exact budgeted-assignment oracle — all offline, with
an HTTP gateway for serving.
"""

__version__ = "0.1.0"

from .core import (
    Arm,
    QueryRecord,
    RewardConfig,
    RoutingDataset,
    compute_reward,
    load_dataset,
    normalize_costs,
    save_dataset,
    token_cost,
)
from .policy import PolicyModel, TrainConfig, load_model, predict_q, save_model, select_arm, train

__all__ = [
    "__version__",
    "Arm",
    "QueryRecord",
    "RewardConfig",
    "RoutingDataset",
    "PolicyModel",
    "TrainConfig",
    "compute_reward",
    "load_dataset",
    "load_model",
    "normalize_costs",
    "predict_q",
    "save_dataset",
    "save_model",
    "select_arm",
    "token_cost",
    "train",
]
