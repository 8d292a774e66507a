"""Sentence encoders behind one small interface.

Two backends:

* ``hash:<dim>`` — a dependency-free feature-hashing encoder over word
  unigrams and bigrams. Stable across runs and platforms (hashes via
  blake2b, never Python's randomized hash), so it suits tests, CI, and
  anywhere byte-exact reproducibility matters more than embedding quality.
* ``st:<model-id>`` — any sentence-transformers model available locally or
  in the local cache.

Vectors are not normalized unless l2_normalize is set; the returned
encoder_id string records dim, version, and the normalization flag so
dataset headers can refuse mixed-encoder mixes.
"""

from __future__ import annotations

import hashlib
import re
from typing import Protocol

import numpy as np

from .errors import EncoderError

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_HASH_VERSION = "v1"


class Encoder(Protocol):
    encoder_id: str
    dim: int

    def encode(self, texts: list[str]) -> np.ndarray: ...


class HashingEncoder:
    def __init__(self, dim: int, l2_normalize: bool = False) -> None:
        if dim < 1:
            raise EncoderError(f"hash encoder dim must be >= 1, got {dim}")
        self.dim = dim
        self.l2_normalize = l2_normalize
        suffix = ":l2" if l2_normalize else ""
        self.encoder_id = f"hash-{_HASH_VERSION}:dim={dim}{suffix}"

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        for row, text in enumerate(texts):
            tokens = _TOKEN_RE.findall(text.lower())
            for feature in tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]:
                digest = hashlib.blake2b(feature.encode(), digest_size=8).digest()
                value = int.from_bytes(digest, "little")
                index = value % self.dim
                sign = 1.0 if (value >> 63) & 1 else -1.0
                out[row, index] += sign
        if self.l2_normalize:
            norms = np.linalg.norm(out, axis=1, keepdims=True)
            np.divide(out, norms, out=out, where=norms > 0)
        return out


class SentenceTransformerEncoder:
    def __init__(self, model_id: str, l2_normalize: bool = False) -> None:
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderError(
                "sentence-transformers is not installed; use the 'st' extra or a hash encoder"
            ) from exc
        try:
            self._model = SentenceTransformer(model_id)
        except Exception as exc:
            raise EncoderError(
                f"encoder {model_id!r} is not available locally or cached: {exc}"
            ) from exc
        self.l2_normalize = l2_normalize
        self.dim = int(self._model.get_sentence_embedding_dimension())
        suffix = ":l2" if l2_normalize else ""
        self.encoder_id = f"sentence-transformers:{model_id}{suffix}"

    def encode(self, texts: list[str]) -> np.ndarray:
        vectors = self._model.encode(
            texts, normalize_embeddings=self.l2_normalize, convert_to_numpy=True
        )
        return np.asarray(vectors, dtype=np.float32)


def get_encoder(spec: str, l2_normalize: bool = False) -> Encoder:
    """Build an encoder from its spec string: ``hash:<dim>`` or ``st:<model>``."""
    kind, _, rest = spec.partition(":")
    if kind == "hash":
        try:
            dim = int(rest)
        except ValueError as exc:
            raise EncoderError(f"bad hash encoder spec {spec!r}; want hash:<dim>") from exc
        return HashingEncoder(dim, l2_normalize)
    if kind == "st":
        if not rest:
            raise EncoderError(f"bad encoder spec {spec!r}; want st:<model-id>")
        return SentenceTransformerEncoder(rest, l2_normalize)
    raise EncoderError(f"unknown encoder kind {kind!r} in {spec!r}")
