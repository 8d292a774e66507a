"""Domain types, cost normalization, the reward function, and dataset files.

Money is handled as `decimal.Decimal` throughout: prices are quoted per 1K
tokens as decimal strings, so Decimal keeps per-query costs and spend ledgers
exact (sums are order-independent, which the gateway's concurrency contract
relies on). Dimensionless quantities (normalized costs, rewards) are floats.

Dataset file format (version 1), line-delimited JSON:

    line 1   header: {"format": "routing-dataset", "version": 1,
                      "embedding_dim": D, "arms": [{"name": ..,
                      "price_per_1k_tokens": "0.0020"}, ..],
                      "encoder": null | str, "sidecar": null | filename}
    line 2+  one record per line: {"query_id", "text", "correctness",
                      "token_counts", "embedding" | "embedding_offset"}

With a sidecar, embeddings live in a companion binary file as little-endian
float32 in record order and each record stores its byte offset instead of an
inline vector. The sidecar filename is resolved relative to the text file.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import ConfigError, DataError, FormatError, InputError, InvalidRosterError

DATASET_FORMAT = "routing-dataset"
DATASET_VERSION = 1

# Published per-1K-token prices for two real provider line-ups; handy as
# gen-synth presets and in docs.
ROSTER_PRESETS: dict[str, list[tuple[str, str]]] = {
    "openai-legacy": [
        ("text-ada-001", "0.0004"),
        ("text-babbage-001", "0.0005"),
        ("text-curie-001", "0.0020"),
        ("text-davinci-002", "0.0200"),
    ],
    "bedrock": [
        ("titan-lite", "0.00015"),
        ("cohere-command-light", "0.00030"),
        ("llama-2-7b", "0.00075"),
        ("claude-instant", "0.00080"),
    ],
}


@dataclass(frozen=True)
class Arm:
    """One candidate LLM endpoint in the roster."""

    arm_id: int
    name: str
    price_per_1k_tokens: Decimal
    normalized_cost: float


@dataclass
class QueryRecord:
    """One labeled query: embedding plus cached per-arm outcomes."""

    query_id: str
    embedding: np.ndarray  # float32, shape (embedding_dim,)
    correctness: tuple[int, ...]
    token_counts: tuple[int, ...]
    text: str | None = None


@dataclass
class RoutingDataset:
    """Arm roster plus ordered query records; the offline evaluation cache."""

    arms: list[Arm]
    records: list[QueryRecord]
    embedding_dim: int
    encoder: str | None = None

    def __post_init__(self) -> None:
        validate_dataset(self)

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    def accuracy_matrix(self) -> np.ndarray:
        """Per-record, per-arm correctness bits as an (N, k) int array."""
        if not self.records:
            return np.zeros((0, self.n_arms), dtype=np.int64)
        return np.array([r.correctness for r in self.records], dtype=np.int64)

    def embedding_matrix(self) -> np.ndarray:
        """All embeddings stacked as an (N, embedding_dim) float32 array."""
        if not self.records:
            return np.zeros((0, self.embedding_dim), dtype=np.float32)
        return np.stack([r.embedding for r in self.records])

    def normalized_costs(self) -> np.ndarray:
        return np.array([a.normalized_cost for a in self.arms], dtype=np.float64)

    def record_by_id(self, query_id: str) -> QueryRecord:
        try:
            return self._index[query_id]
        except AttributeError:
            self._index = {r.query_id: r for r in self.records}
            return self._index[query_id]


@dataclass(frozen=True)
class RewardConfig:
    """Scaling between correctness and cost in the reward correct - p*cost."""

    p: float = 0.0
    cost_mode: Literal["fixed", "dynamic"] = "fixed"

    def __post_init__(self) -> None:
        if self.p < 0:
            raise ConfigError(f"cost scaling p must be >= 0, got {self.p}")
        if self.cost_mode not in ("fixed", "dynamic"):
            raise ConfigError(f"cost_mode must be 'fixed' or 'dynamic', got {self.cost_mode!r}")


def normalize_costs(prices: Sequence[Decimal | str | float | int]) -> list[float]:
    """Divide each price by the roster maximum so the priciest arm costs 1.

    Ties at the maximum all map to 1. Raises InvalidRosterError for an empty
    list, a negative price, or an all-zero roster.
    """
    if len(prices) == 0:
        raise InvalidRosterError("cannot normalize an empty price list")
    decs = [_as_decimal(p) for p in prices]
    if any(d < 0 for d in decs):
        raise InvalidRosterError("prices must be non-negative")
    top = max(decs)
    if top == 0:
        raise InvalidRosterError("all prices are zero; no cost scale exists")
    return [float(d / top) for d in decs]


def compute_reward(correct: int, cost: float, config: RewardConfig) -> float:
    """Reward of serving one query with one arm: correct - p*cost."""
    if correct not in (0, 1):
        raise InputError(f"correct must be 0 or 1, got {correct!r}")
    if not 0.0 <= cost <= 1.0:
        raise InputError(f"normalized cost must lie in [0, 1], got {cost}")
    return correct - config.p * cost

def token_cost(price_per_1k: Decimal | str, tokens: int) -> Decimal:
    """Dollar cost of a call: price per 1K tokens times tokens used."""
    if tokens < 0:
        raise InputError(f"token count must be >= 0, got {tokens}")
    return _as_decimal(price_per_1k) * tokens / Decimal(1000)


def argmax_preferring_cheap(scores: Sequence[float], costs: Sequence[float]) -> int:
    """Index of the maximal score; exact ties go to the lower cost, then lower index.

    The shared tie rule for both the learned router and the threshold oracle:
    it is what makes chosen cost non-increasing in the cost scaling.
    """
    if len(scores) == 0:
        raise InputError("cannot select from an empty roster")
    if len(scores) != len(costs):
        raise InputError(f"scores ({len(scores)}) and costs ({len(costs)}) differ in length")
    best = 0
    for j in range(1, len(scores)):
        if scores[j] > scores[best] or (scores[j] == scores[best] and costs[j] < costs[best]):
            best = j
    return best


def build_roster(entries: Iterable[tuple[str, Decimal | str]]) -> list[Arm]:
    """Create Arm values (ids by position) with normalized costs filled in."""
    pairs = [(name, _as_decimal(price)) for name, price in entries]
    norm = normalize_costs([p for _, p in pairs])
    return [
        Arm(arm_id=i, name=name, price_per_1k_tokens=price, normalized_cost=norm[i])
        for i, (name, price) in enumerate(pairs)
    ]


def roster_fingerprint(arms: Sequence[Arm]) -> str:
    """Stable hash of (name, price) pairs; used for model/dataset compat checks."""
    canon = json.dumps([[a.name, str(a.price_per_1k_tokens)] for a in arms])
    return hashlib.sha256(canon.encode()).hexdigest()


def validate_dataset(ds: RoutingDataset) -> None:
    """Check every type invariant; raises DataError naming the offending record."""
    if not ds.arms:
        raise InvalidRosterError("dataset has no arms")
    if ds.embedding_dim <= 0:
        raise DataError(f"embedding_dim must be positive, got {ds.embedding_dim}")
    k = len(ds.arms)
    seen: set[str] = set()
    for rec in ds.records:
        if rec.query_id in seen:
            raise DataError(f"record {rec.query_id!r}: duplicate query_id")
        seen.add(rec.query_id)
        if rec.embedding.shape != (ds.embedding_dim,):
            raise DataError(
                f"record {rec.query_id!r}: embedding length {rec.embedding.shape[0] if rec.embedding.ndim == 1 else rec.embedding.shape}"
                f" != embedding_dim {ds.embedding_dim}"
            )
        if len(rec.correctness) != k:
            raise DataError(
                f"record {rec.query_id!r}: correctness length {len(rec.correctness)} != arm count {k}"
            )
        if len(rec.token_counts) != k:
            raise DataError(
                f"record {rec.query_id!r}: token_counts length {len(rec.token_counts)} != arm count {k}"
            )
        if any(bit not in (0, 1) for bit in rec.correctness):
            raise DataError(f"record {rec.query_id!r}: correctness bits must be 0 or 1")
        if any(t < 0 for t in rec.token_counts):
            raise DataError(f"record {rec.query_id!r}: token counts must be >= 0")


def save_dataset(ds: RoutingDataset, path: str | Path, sidecar: bool = False) -> None:
    """Write a dataset; with sidecar=True embeddings go to <path>.emb as float32."""
    path = Path(path)
    sidecar_name = path.name + ".emb" if sidecar else None
    header = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "embedding_dim": ds.embedding_dim,
        "arms": [
            {"name": a.name, "price_per_1k_tokens": str(a.price_per_1k_tokens)}
            for a in ds.arms
        ],
        "encoder": ds.encoder,
        "sidecar": sidecar_name,
    }
    lines = [_dumps(header)]
    emb_chunks: list[bytes] = []
    offset = 0
    for rec in ds.records:
        row: dict = {
            "query_id": rec.query_id,
            "text": rec.text,
            "correctness": list(rec.correctness),
            "token_counts": list(rec.token_counts),
        }
        if sidecar:
            row["embedding_offset"] = offset
            raw = np.asarray(rec.embedding, dtype="<f4").tobytes()
            emb_chunks.append(raw)
            offset += len(raw)
        else:
            row["embedding"] = [float(v) for v in rec.embedding]
        lines.append(_dumps(row))
    if sidecar:
        atomic_write_bytes(path.parent / sidecar_name, b"".join(emb_chunks))
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())


def load_dataset(path: str | Path) -> RoutingDataset:
    """Read a dataset file (and its sidecar, if declared), verifying invariants."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read dataset file {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    header = _parse_json_line(lines[0], path, "header")
    if header.get("format") != DATASET_FORMAT:
        raise FormatError(f"{path}: not a {DATASET_FORMAT} file")
    if header.get("version") != DATASET_VERSION:
        raise FormatError(f"{path}: unsupported version {header.get('version')!r}")
    dim = header.get("embedding_dim")
    if not isinstance(dim, int) or dim <= 0:
        raise DataError(f"{path}: embedding_dim must be a positive integer")
    try:
        arms = build_roster(
            (a["name"], a["price_per_1k_tokens"]) for a in header["arms"]
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: malformed arm roster in header") from exc

    sidecar_blob: bytes | None = None
    if header.get("sidecar"):
        sidecar_path = path.parent / header["sidecar"]
        try:
            sidecar_blob = sidecar_path.read_bytes()
        except OSError as exc:
            raise FormatError(f"cannot read sidecar {sidecar_path}: {exc}") from exc

    records: list[QueryRecord] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        row = _parse_json_line(line, path, f"line {lineno}")
        qid = row.get("query_id")
        if not isinstance(qid, str) or not qid:
            raise DataError(f"{path}:{lineno}: missing query_id")
        if sidecar_blob is not None:
            off = row.get("embedding_offset")
            if not isinstance(off, int) or off < 0 or off + 4 * dim > len(sidecar_blob):
                raise DataError(f"record {qid!r}: embedding_offset out of range")
            emb = np.frombuffer(sidecar_blob, dtype="<f4", count=dim, offset=off).copy()
        else:
            vec = row.get("embedding")
            if not isinstance(vec, list):
                raise DataError(f"record {qid!r}: missing inline embedding")
            emb = np.asarray(vec, dtype=np.float32)
        records.append(
            QueryRecord(
                query_id=qid,
                embedding=emb,
                correctness=tuple(row.get("correctness", ())),
                token_counts=tuple(row.get("token_counts", ())),
                text=row.get("text"),
            )
        )
    return RoutingDataset(
        arms=arms, records=records, embedding_dim=dim, encoder=header.get("encoder")
    )


def datasets_equal(a: RoutingDataset, b: RoutingDataset) -> bool:
    """Structural equality, embeddings compared bit-exactly."""
    if (
        a.embedding_dim != b.embedding_dim
        or a.encoder != b.encoder
        or len(a.arms) != len(b.arms)
        or len(a.records) != len(b.records)
    ):
        return False
    for x, y in zip(a.arms, b.arms):
        if (x.name, x.price_per_1k_tokens, x.normalized_cost) != (
            y.name,
            y.price_per_1k_tokens,
            y.normalized_cost,
        ):
            return False
    for r, s in zip(a.records, b.records):
        if (
            r.query_id != s.query_id
            or r.text != s.text
            or r.correctness != s.correctness
            or r.token_counts != s.token_counts
            or not np.array_equal(r.embedding, s.embedding)
        ):
            return False
    return True


def atomic_write_bytes(path: str | Path, blob: bytes) -> None:
    """Write via a temp file in the same directory, then rename into place."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def _as_decimal(value: Decimal | str | float | int) -> Decimal:
    if isinstance(value, Decimal):
        return value
    if isinstance(value, (str, int)):
        try:
            return Decimal(value)
        except InvalidOperation as exc:
            raise DataError(f"not a decimal number: {value!r}") from exc
    # Floats go through repr so 0.02 becomes Decimal("0.02"), not the full
    # binary expansion.
    return Decimal(repr(value))


def _dumps(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _parse_json_line(line: str, path: Path, where: str):
    try:
        return json.loads(line)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at {where}: {exc}") from exc
