"""Offline provider: serve queries from cached outcomes, and synthesize data.

Live re-querying is not an option for reproducing routing experiments (the
cheap OpenAI completion models those runs used are deprecated), so every
evaluation here replays cached per-(query, arm) correctness bits and token
counts. The synthetic generator builds datasets with controllable
heterogeneity: well-separated embedding clusters, each served by explicitly
capable arms, so that a linear router can provably realize oracle routing.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from decimal import Decimal

import numpy as np

from .core import QueryRecord, RoutingDataset, build_roster, token_cost
from .errors import ConfigError, InputError, UnknownQueryError

# Cluster offsets have unit RMS norm; centers sit on orthogonal axes at this
# radius, giving pairwise separation 5*sqrt(2) ≈ 7.1 cluster radii (>= 6).
_CENTER_SCALE = 5.0
_TOKEN_RANGE = (20, 120)


@dataclass
class ReplayProvider:
    """Answers queries from a dataset's cache and meters the spend per arm."""

    dataset: RoutingDataset
    spend_ledger: dict[int, Decimal] = field(init=False)

    def __post_init__(self) -> None:
        self.spend_ledger = {a.arm_id: Decimal(0) for a in self.dataset.arms}
        self._lock = threading.Lock()

    def answer(self, query_id: str, arm_id: int) -> tuple[int, Decimal]:
        """Cached (correctness bit, dollar cost) for routing query_id to arm_id."""
        try:
            record = self.dataset.record_by_id(query_id)
        except KeyError:
            raise UnknownQueryError(query_id) from None
        if not 0 <= arm_id < self.dataset.n_arms:
            raise InputError(f"arm_id {arm_id} outside roster of {self.dataset.n_arms}")
        arm = self.dataset.arms[arm_id]
        cost = token_cost(arm.price_per_1k_tokens, record.token_counts[arm_id])
        with self._lock:
            self.spend_ledger[arm_id] += cost
        return record.correctness[arm_id], cost

    def total_spend(self) -> Decimal:
        with self._lock:
            return sum(self.spend_ledger.values(), Decimal(0))


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic routing dataset.

    capabilities maps each arm to the clusters it can answer (correct with
    probability 1-noise there, noise elsewhere). The default is the
    round-robin partition cluster c -> arm c mod n_arms, under which every
    record has exactly one capable arm. Maps where an expensive arm covers
    many clusters reproduce the usual provider landscape: a costly generalist
    plus cheap specialists.
    """

    n_arms: int
    n_clusters: int
    dim: int
    n_records: int
    noise: float
    costs: tuple[str, ...]
    seed: int = 0
    capabilities: tuple[tuple[int, ...], ...] | None = None
    names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.n_arms < 2:
            raise ConfigError(f"need at least 2 arms, got {self.n_arms}")
        if self.names is not None and len(self.names) != self.n_arms:
            raise ConfigError(f"got {len(self.names)} names for {self.n_arms} arms")
        if self.n_clusters < 1:
            raise ConfigError(f"need at least 1 cluster, got {self.n_clusters}")
        if self.n_clusters > self.dim:
            raise ConfigError(
                f"cluster centers are placed on orthogonal axes; n_clusters "
                f"({self.n_clusters}) cannot exceed dim ({self.dim})"
            )
        if self.n_records < 1:
            raise ConfigError(f"need at least 1 record, got {self.n_records}")
        if not 0.0 <= self.noise < 0.5:
            raise ConfigError(f"noise must lie in [0, 0.5), got {self.noise}")
        if len(self.costs) != self.n_arms:
            raise ConfigError(
                f"got {len(self.costs)} costs for {self.n_arms} arms"
            )
        covered = set()
        for clusters in self.arm_clusters():
            covered.update(clusters)
        if covered != set(range(self.n_clusters)):
            missing = sorted(set(range(self.n_clusters)) - covered)
            raise ConfigError(f"capability map leaves clusters {missing} unserved")

    def arm_clusters(self) -> tuple[tuple[int, ...], ...]:
        """Per-arm capable clusters, defaulting to the round-robin partition."""
        if self.capabilities is not None:
            if len(self.capabilities) != self.n_arms:
                raise ConfigError(
                    f"capabilities lists {len(self.capabilities)} arms, expected {self.n_arms}"
                )
            return self.capabilities
        return tuple(
            tuple(c for c in range(self.n_clusters) if c % self.n_arms == j)
            for j in range(self.n_arms)
        )


def gen_synthetic(spec: SynthSpec) -> RoutingDataset:
    """Deterministic synthetic dataset built from a SynthSpec recipe.

    Records cycle through clusters (sizes equal up to one), embeddings are
    isotropic around orthogonal centers, and token counts are drawn once per
    record and shared by all arms (prompt length dominates token use).
    """
    rng = np.random.default_rng(spec.seed)
    names = spec.names or tuple(f"arm-{j}" for j in range(spec.n_arms))
    arms = build_roster(zip(names, spec.costs))
    capable = spec.arm_clusters()
    capable_mask = np.zeros((spec.n_arms, spec.n_clusters), dtype=bool)
    for j, clusters in enumerate(capable):
        for c in clusters:
            if not 0 <= c < spec.n_clusters:
                raise ConfigError(f"arm {j} maps to unknown cluster {c}")
            capable_mask[j, c] = True

    centers = np.zeros((spec.n_clusters, spec.dim), dtype=np.float64)
    for c in range(spec.n_clusters):
        centers[c, c] = _CENTER_SCALE

    n, k = spec.n_records, spec.n_arms
    clusters = np.arange(n) % spec.n_clusters
    sigma = 1.0 / np.sqrt(spec.dim)
    offsets = rng.normal(0.0, sigma, size=(n, spec.dim))
    embeddings = (centers[clusters] + offsets).astype(np.float32)
    correct_prob = np.where(capable_mask.T[clusters], 1.0 - spec.noise, spec.noise)
    correctness = (rng.random((n, k)) < correct_prob).astype(np.int64)
    tokens = rng.integers(_TOKEN_RANGE[0], _TOKEN_RANGE[1] + 1, size=n)

    records = [
        QueryRecord(
            query_id=f"synth-{i:06d}",
            embedding=embeddings[i],
            correctness=tuple(int(b) for b in correctness[i]),
            token_counts=(int(tokens[i]),) * k,
        )
        for i in range(n)
    ]
    return RoutingDataset(arms=arms, records=records, embedding_dim=spec.dim)


def split_dataset(
    dataset: RoutingDataset, n_train: int
) -> tuple[RoutingDataset, RoutingDataset]:
    """Front/back split preserving record order and the shared roster."""
    if not 0 <= n_train <= len(dataset.records):
        raise InputError(
            f"cannot take {n_train} training records from {len(dataset.records)}"
        )
    head = RoutingDataset(
        arms=dataset.arms,
        records=dataset.records[:n_train],
        embedding_dim=dataset.embedding_dim,
        encoder=dataset.encoder,
    )
    tail = RoutingDataset(
        arms=dataset.arms,
        records=dataset.records[n_train:],
        embedding_dim=dataset.embedding_dim,
        encoder=dataset.encoder,
    )
    return head, tail
