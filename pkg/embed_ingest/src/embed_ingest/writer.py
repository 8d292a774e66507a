"""Routing-dataset writer speaking the router's documented file schema.

Format (version 1): a line-delimited text file whose first line is a JSON
header ({format, version, embedding_dim, arms, encoder, sidecar}) followed by
one JSON record per line; embeddings live in a sidecar of little-endian
float32 vectors in record order, each record holding its byte offset. An
inline mode stores the vectors in the records instead.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .corpus import CorpusRow, RosterArm
from .errors import SchemaError

DATASET_FORMAT = "routing-dataset"
DATASET_VERSION = 1


def write_dataset(
    out_path: str | Path,
    roster: list[RosterArm],
    rows: list[CorpusRow],
    embeddings: np.ndarray,
    encoder_id: str,
    sidecar: bool = True,
) -> None:
    out_path = Path(out_path)
    if embeddings.ndim != 2 or embeddings.shape[0] != len(rows):
        raise SchemaError(
            f"embeddings shape {embeddings.shape} does not cover {len(rows)} rows"
        )
    check_encoder_compatible(out_path, encoder_id)
    dim = int(embeddings.shape[1])
    sidecar_name = out_path.name + ".emb" if sidecar else None
    header = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "embedding_dim": dim,
        "arms": [
            {"name": a.name, "price_per_1k_tokens": a.price_per_1k_tokens} for a in roster
        ],
        "encoder": encoder_id,
        "sidecar": sidecar_name,
    }
    lines = [json.dumps(header, separators=(",", ":"), allow_nan=False)]
    vectors = np.ascontiguousarray(embeddings, dtype="<f4")
    for i, row in enumerate(rows):
        record: dict = {
            "query_id": row.query_id,
            "text": row.text,
            "correctness": list(row.correctness),
            "token_counts": list(row.token_counts),
        }
        if sidecar:
            record["embedding_offset"] = i * 4 * dim
        else:
            record["embedding"] = [float(v) for v in vectors[i]]
        lines.append(json.dumps(record, separators=(",", ":"), allow_nan=False))
    if sidecar:
        _atomic_write(out_path.parent / sidecar_name, vectors.tobytes())
    _atomic_write(out_path, ("\n".join(lines) + "\n").encode())


def check_encoder_compatible(out_path: Path, encoder_id: str) -> None:
    """Refuse to replace an existing dataset embedded with a different encoder."""
    if not out_path.exists():
        return
    try:
        header = json.loads(out_path.read_text().splitlines()[0])
    except (OSError, json.JSONDecodeError, IndexError):
        return  # not a dataset; plain overwrite
    if header.get("format") != DATASET_FORMAT:
        return
    existing = header.get("encoder")
    if existing is not None and existing != encoder_id:
        raise SchemaError(
            f"{out_path} was embedded with {existing!r}; refusing to mix with {encoder_id!r}"
        )


def _atomic_write(path: Path, blob: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)
