"""The end-to-end corpus embedding pipeline."""

from __future__ import annotations

from pathlib import Path

from .corpus import read_corpus, read_roster
from .encoders import get_encoder
from .writer import write_dataset


def embed_corpus(
    corpus_path: str | Path,
    roster_path: str | Path,
    encoder_spec: str,
    out_path: str | Path,
    l2_normalize: bool = False,
    sidecar: bool = True,
) -> int:
    """Embed every corpus row and write the routing dataset; returns row count.

    Deterministic for a fixed encoder spec: the same corpus produces
    byte-identical text and sidecar files.
    """
    roster = read_roster(roster_path)
    rows = read_corpus(corpus_path, roster)
    encoder = get_encoder(encoder_spec, l2_normalize=l2_normalize)
    embeddings = encoder.encode([row.text for row in rows])
    write_dataset(
        out_path,
        roster,
        rows,
        embeddings,
        encoder_id=encoder.encoder_id,
        sidecar=sidecar,
    )
    return len(rows)
