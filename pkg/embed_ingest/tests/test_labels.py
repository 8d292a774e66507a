from __future__ import annotations

import json

from embed_ingest.labels import derive_correctness, parse_label

from conftest import FIXTURES


def test_parity_fixture_matches_50_of_50():
    rows = [
        json.loads(line)
        for line in (FIXTURES / "parse_label_parity.jsonl").read_text().splitlines()
    ]
    assert len(rows) == 50
    agreements = sum(parse_label(r["completion"]) == r["label"] for r in rows)
    assert agreements == 50


def test_first_occurrence_wins():
    assert parse_label("it is positive, not negative") == "positive"
    assert parse_label("negative... well, maybe positive") == "negative"


def test_neither_word_abstains():
    assert parse_label("I cannot tell.") == "abstain"


def test_abstain_counts_as_incorrect():
    assert derive_correctness("I cannot tell.", "positive") == 0
    assert derive_correctness("Positive.", "positive") == 1
    assert derive_correctness("Positive.", "negative") == 0
