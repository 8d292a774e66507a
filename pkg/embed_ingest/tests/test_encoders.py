from __future__ import annotations

import numpy as np
import pytest

from embed_ingest.encoders import HashingEncoder, get_encoder
from embed_ingest.errors import EncoderError

TEXTS = [
    "An absolute delight from start to finish.",
    "Two hours of my life I will never get back.",
    "the same words the same words",
]


def test_hash_encoder_is_deterministic():
    a = HashingEncoder(64).encode(TEXTS)
    b = HashingEncoder(64).encode(TEXTS)
    assert a.dtype == np.float32
    assert a.shape == (3, 64)
    assert np.array_equal(a, b)
    assert a.tobytes() == b.tobytes()


def test_different_texts_differ():
    vecs = HashingEncoder(64).encode(TEXTS)
    assert not np.array_equal(vecs[0], vecs[1])


def test_l2_normalize_flag():
    raw = HashingEncoder(32).encode(TEXTS)
    unit = HashingEncoder(32, l2_normalize=True).encode(TEXTS)
    assert not np.allclose(np.linalg.norm(raw, axis=1), 1.0)
    assert np.allclose(np.linalg.norm(unit, axis=1), 1.0)


def test_encoder_id_records_dim_and_normalization():
    assert HashingEncoder(64).encoder_id == "hash-v1:dim=64"
    assert HashingEncoder(64, l2_normalize=True).encoder_id == "hash-v1:dim=64:l2"


def test_get_encoder_parses_specs():
    enc = get_encoder("hash:128")
    assert enc.dim == 128
    with pytest.raises(EncoderError):
        get_encoder("hash:not-a-number")
    with pytest.raises(EncoderError):
        get_encoder("st:")
    with pytest.raises(EncoderError):
        get_encoder("quantum:512")


def test_empty_text_embeds_to_zero_vector():
    vec = HashingEncoder(16).encode([""])
    assert not vec.any()
