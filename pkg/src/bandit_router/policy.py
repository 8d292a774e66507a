"""The contextual-bandit router: per-arm linear reward estimates.

Each arm j has a weight vector (and optional intercept) mapping a query
embedding x to an expected reward Q_j(x). Training makes one pass per step
over the records in order; for each record it either updates the currently
greedy arm toward its realized reward (greedy_arm mode, optionally with
epsilon-random exploration) or updates every arm toward its own reward
(full_information mode, usable offline because the replay cache knows every
arm's outcome). Updates are plain SGD on the squared error:

    w_j += lr * 2 * (r - Q_j(x)) * x

Training is deterministic given the seed; the RNG is touched only for
epsilon draws, so epsilon=0 runs consume no randomness at all.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .core import (
    Arm,
    RewardConfig,
    RoutingDataset,
    argmax_preferring_cheap,
    atomic_write_bytes,
    build_roster,
    roster_fingerprint,
    token_cost,
)
from .errors import CompatibilityError, ConfigError, DataError, FormatError, InputError

MODEL_FORMAT = "reward-policy"
MODEL_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 20
    learning_rate: float = 0.01
    seed: int = 0
    update_mode: Literal["greedy_arm", "full_information"] = "greedy_arm"
    epsilon: float = 0.0
    use_bias: bool = True
    reward: RewardConfig = field(default_factory=RewardConfig)

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise ConfigError(f"steps must be >= 0, got {self.steps}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.update_mode not in ("greedy_arm", "full_information"):
            raise ConfigError(f"unknown update_mode {self.update_mode!r}")


@dataclass
class PolicyModel:
    """Trained router state; immutable in use (predictions never mutate it)."""

    weights: np.ndarray  # float64, shape (n_arms, embedding_dim)
    bias: np.ndarray | None  # float64, shape (n_arms,) when enabled
    arms: list[Arm]
    train_config: TrainConfig
    embedding_dim: int

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    @property
    def roster_fingerprint(self) -> str:
        return roster_fingerprint(self.arms)


def init_model(arms: Sequence[Arm], embedding_dim: int, config: TrainConfig) -> PolicyModel:
    """All-zero model: predicts 0 for every arm, so cold-start routing is
    the cheapest arm via the tie rule."""
    if not arms:
        raise InputError("cannot initialize a model with an empty roster")
    k = len(arms)
    return PolicyModel(
        weights=np.zeros((k, embedding_dim), dtype=np.float64),
        bias=np.zeros(k, dtype=np.float64) if config.use_bias else None,
        arms=list(arms),
        train_config=config,
        embedding_dim=embedding_dim,
    )


def predict_q(model: PolicyModel, embedding: np.ndarray) -> np.ndarray:
    """Per-arm expected rewards for one embedding."""
    x = np.asarray(embedding, dtype=np.float64)
    if x.shape != (model.embedding_dim,):
        raise InputError(
            f"embedding length {x.shape} does not match model dim {model.embedding_dim}"
        )
    q = model.weights @ x
    if model.bias is not None:
        q = q + model.bias
    return q


def select_arm(q_values: Sequence[float], arms: Sequence[Arm]) -> int:
    """Arm id with the highest predicted reward; ties go to the cheaper arm."""
    if len(q_values) != len(arms):
        raise InputError(
            f"q_values length {len(q_values)} != roster size {len(arms)}"
        )
    costs = [a.normalized_cost for a in arms]
    return argmax_preferring_cheap(list(q_values), costs)


def reward_matrix(dataset: RoutingDataset, reward: RewardConfig) -> np.ndarray:
    """Realized rewards r(x_i, j) = a_j(x_i) - p*c for every (record, arm).

    fixed mode uses each arm's normalized roster cost; dynamic mode uses the
    per-query dollar cost normalized by the maximum per-query cost seen in
    this dataset, so both modes keep costs in (0, 1].
    """
    a = dataset.accuracy_matrix().astype(np.float64)
    if reward.cost_mode == "fixed":
        c = dataset.normalized_costs()[None, :]
    else:
        dollars = np.array(
            [
                [
                    float(token_cost(arm.price_per_1k_tokens, rec.token_counts[j]))
                    for j, arm in enumerate(dataset.arms)
                ]
                for rec in dataset.records
            ],
            dtype=np.float64,
        )
        top = dollars.max() if dollars.size else 0.0
        if top <= 0:
            raise DataError("dynamic cost mode needs at least one positive per-query cost")
        c = dollars / top
    return a - reward.p * c


def train(dataset: RoutingDataset, config: TrainConfig) -> PolicyModel:
    """Run the bandit training loop over the dataset and return the model."""
    if not dataset.records:
        raise InputError("cannot train on an empty dataset")
    X = dataset.embedding_matrix().astype(np.float64)
    if not np.all(np.isfinite(X)):
        raise DataError("dataset embeddings contain NaN or infinite values")
    R = reward_matrix(dataset, config.reward)
    costs = [a.normalized_cost for a in dataset.arms]
    k = dataset.n_arms
    model = init_model(dataset.arms, dataset.embedding_dim, config)
    W = model.weights
    b = model.bias
    lr2 = 2.0 * config.learning_rate
    rng = np.random.default_rng(config.seed) if config.epsilon > 0 else None

    for _ in range(config.steps):
        for i in range(len(dataset.records)):
            x = X[i]
            q = W @ x
            if b is not None:
                q = q + b
            if config.update_mode == "full_information":
                err = lr2 * (R[i] - q)
                W += err[:, None] * x
                if b is not None:
                    b += err
            else:
                if rng is not None and rng.random() < config.epsilon:
                    j = int(rng.integers(k))
                else:
                    j = argmax_preferring_cheap(q, costs)
                err = lr2 * (R[i, j] - q[j])
                W[j] += err * x
                if b is not None:
                    b[j] += err
    return model


def save_model(model: PolicyModel, path: str | Path) -> None:
    """Write the model container; byte-identical for identical models."""
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "embedding_dim": model.embedding_dim,
        "n_arms": model.n_arms,
        "roster_fingerprint": model.roster_fingerprint,
        "arms": [
            {"name": a.name, "price_per_1k_tokens": str(a.price_per_1k_tokens)}
            for a in model.arms
        ],
        "train_config": {
            "steps": model.train_config.steps,
            "learning_rate": model.train_config.learning_rate,
            "seed": model.train_config.seed,
            "update_mode": model.train_config.update_mode,
            "epsilon": model.train_config.epsilon,
            "use_bias": model.train_config.use_bias,
            "reward": {
                "p": model.train_config.reward.p,
                "cost_mode": model.train_config.reward.cost_mode,
            },
        },
        "weights": base64.b64encode(
            np.ascontiguousarray(model.weights, dtype="<f8").tobytes()
        ).decode(),
        "bias": (
            base64.b64encode(np.ascontiguousarray(model.bias, dtype="<f8").tobytes()).decode()
            if model.bias is not None
            else None
        ),
    }
    blob = json.dumps(payload, separators=(",", ":"), allow_nan=False).encode()
    atomic_write_bytes(path, blob)


def load_model(path: str | Path) -> PolicyModel:
    """Read a model container back; truncated or foreign files raise FormatError."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except OSError as exc:
        raise FormatError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not a valid model container: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise FormatError(f"{path}: not a {MODEL_FORMAT} container")
    if payload.get("version") != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported model version {payload.get('version')!r}")
    try:
        dim = payload["embedding_dim"]
        k = payload["n_arms"]
        arms = build_roster(
            (a["name"], a["price_per_1k_tokens"]) for a in payload["arms"]
        )
        tc = payload["train_config"]
        config = TrainConfig(
            steps=tc["steps"],
            learning_rate=tc["learning_rate"],
            seed=tc["seed"],
            update_mode=tc["update_mode"],
            epsilon=tc["epsilon"],
            use_bias=tc["use_bias"],
            reward=RewardConfig(p=tc["reward"]["p"], cost_mode=tc["reward"]["cost_mode"]),
        )
        weights = np.frombuffer(
            base64.b64decode(payload["weights"]), dtype="<f8"
        ).reshape(k, dim).copy()
        bias = (
            np.frombuffer(base64.b64decode(payload["bias"]), dtype="<f8").copy()
            if payload["bias"] is not None
            else None
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed model container: {exc}") from exc
    if len(arms) != k:
        raise FormatError(f"{path}: arm roster length disagrees with n_arms")
    if bias is not None and bias.shape != (k,):
        raise FormatError(f"{path}: bias vector has wrong length")
    model = PolicyModel(
        weights=weights, bias=bias, arms=arms, train_config=config, embedding_dim=dim
    )
    if payload["roster_fingerprint"] != model.roster_fingerprint:
        raise FormatError(f"{path}: roster fingerprint does not match stored roster")
    return model


def check_compatible(model: PolicyModel, dataset: RoutingDataset) -> None:
    """Refuse to pair a model with a dataset it was not trained against."""
    if model.embedding_dim != dataset.embedding_dim:
        raise CompatibilityError(
            f"model dim {model.embedding_dim} != dataset dim {dataset.embedding_dim}"
        )
    if model.n_arms != dataset.n_arms:
        raise CompatibilityError(
            f"model has {model.n_arms} arms, dataset has {dataset.n_arms}"
        )
    if model.roster_fingerprint != roster_fingerprint(dataset.arms):
        raise CompatibilityError("model and dataset arm rosters differ")
