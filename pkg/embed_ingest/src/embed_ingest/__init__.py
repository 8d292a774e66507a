"""Offline corpus-to-dataset tool for the routing stack.

Reads a labeled corpus with per-arm completions (or ready correctness bits),
embeds every text with a configured sentence encoder, and writes a routing
dataset file (text header + float32 sidecar) that the router's own
``validate-data`` accepts as-is.
"""

__version__ = "0.1.0"

from .errors import EncoderError, SchemaError
from .ingest import embed_corpus
from .labels import parse_label

__all__ = ["__version__", "EncoderError", "SchemaError", "embed_corpus", "parse_label"]
