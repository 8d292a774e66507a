"""Answer-to-label rule, replicated bit-exactly from the gateway's contract.

The router gateway labels a raw completion by whichever of positive/negative
occurs first, case-insensitively, abstaining when neither appears; abstain
counts as incorrect. Correctness bits derived here must agree with the
gateway on every completion, which the shared parity fixture pins down.
"""

from __future__ import annotations

LABEL_POSITIVE = "positive"
LABEL_NEGATIVE = "negative"
LABEL_ABSTAIN = "abstain"


def parse_label(raw_text: str) -> str:
    low = raw_text.lower()
    pos = low.find(LABEL_POSITIVE)
    neg = low.find(LABEL_NEGATIVE)
    if pos < 0 and neg < 0:
        return LABEL_ABSTAIN
    if pos < 0:
        return LABEL_NEGATIVE
    if neg < 0:
        return LABEL_POSITIVE
    return LABEL_POSITIVE if pos < neg else LABEL_NEGATIVE


def derive_correctness(completion: str, gold_label: str) -> int:
    """1 iff the parsed completion matches the gold label; abstain is 0."""
    return int(parse_label(completion) == gold_label)
