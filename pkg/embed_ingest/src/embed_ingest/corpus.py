"""Corpus and roster readers with per-row validation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import SchemaError
from .labels import derive_correctness


@dataclass(frozen=True)
class RosterArm:
    name: str
    price_per_1k_tokens: str


@dataclass
class CorpusRow:
    query_id: str
    text: str
    label: str
    correctness: tuple[int, ...]
    token_counts: tuple[int, ...]


def read_roster(path: str | Path) -> list[RosterArm]:
    """Shared roster file: {"arms": [{"name", "price_per_1k_tokens"}, ...]}."""
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read roster file {path}: {exc}") from exc
    try:
        arms = [
            RosterArm(name=a["name"], price_per_1k_tokens=str(a["price_per_1k_tokens"]))
            for a in payload["arms"]
        ]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: malformed roster file") from exc
    if not arms:
        raise SchemaError(f"{path}: roster declares no arms")
    names = [a.name for a in arms]
    if len(set(names)) != len(names):
        raise SchemaError(f"{path}: duplicate arm names in roster")
    return arms


def read_corpus(path: str | Path, roster: list[RosterArm]) -> list[CorpusRow]:
    """Line-delimited JSON corpus, one row per query.

    Each row needs query_id, text, label, per-arm token_counts, and either
    per-arm correctness bits or per-arm raw completions (bits then derived
    with the gateway's answer-matching rule). Arm keys follow roster names.
    """
    names = [a.name for a in roster]
    rows: list[CorpusRow] = []
    seen: set[str] = set()
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise SchemaError(f"cannot read corpus {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        qid = row.get("query_id")
        if not isinstance(qid, str) or not qid:
            raise SchemaError(f"{path}:{lineno}: missing query_id")
        if qid in seen:
            raise SchemaError(f"row {qid!r}: duplicate query_id")
        seen.add(qid)
        text = row.get("text")
        if not isinstance(text, str) or not text:
            raise SchemaError(f"row {qid!r}: missing text")
        label = row.get("label")
        if not isinstance(label, str) or not label:
            raise SchemaError(f"row {qid!r}: missing label")

        bits = row.get("correctness")
        completions = row.get("completions")
        if bits is not None:
            correctness = tuple(_arm_value(bits, name, qid, "correctness") for name in names)
            if any(b not in (0, 1) for b in correctness):
                raise SchemaError(f"row {qid!r}: correctness bits must be 0 or 1")
        elif completions is not None:
            correctness = tuple(
                derive_correctness(_arm_value(completions, name, qid, "completions"), label)
                for name in names
            )
        else:
            raise SchemaError(f"row {qid!r}: needs either correctness bits or completions")

        counts = row.get("token_counts")
        if counts is None:
            raise SchemaError(f"row {qid!r}: missing token_counts")
        token_counts = tuple(_arm_value(counts, name, qid, "token_counts") for name in names)
        if any(not isinstance(t, int) or t < 0 for t in token_counts):
            raise SchemaError(f"row {qid!r}: token counts must be non-negative integers")

        rows.append(
            CorpusRow(
                query_id=qid,
                text=text,
                label=label,
                correctness=correctness,
                token_counts=token_counts,
            )
        )
    return rows


def _arm_value(mapping, name: str, qid: str, field: str):
    if not isinstance(mapping, dict) or name not in mapping:
        raise SchemaError(f"row {qid!r}: {field} is missing arm {name!r}")
    return mapping[name]
