from __future__ import annotations


class IngestError(Exception):
    """Base class for this tool's errors."""


class SchemaError(IngestError):
    """A corpus row, roster file, or output header violates its schema."""


class EncoderError(IngestError):
    """The requested encoder is unknown or unavailable locally."""
