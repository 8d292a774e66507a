"""CLI: embed a labeled corpus into a routing dataset file.

Exit codes: 0 success, 1 usage error, 2 schema/data error.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .errors import EncoderError, SchemaError
from .ingest import embed_corpus


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="embed-ingest",
        description="Embed a labeled corpus with per-arm LLM outcomes into a routing dataset.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--corpus", required=True, help="line-delimited JSON corpus")
    parser.add_argument("--roster", required=True, help="arm roster file shared with the router")
    parser.add_argument(
        "--encoder",
        default="hash:256",
        help="sentence encoder: hash:<dim> or st:<model-id> (default hash:256)",
    )
    parser.add_argument("--out", required=True, help="output dataset path")
    parser.add_argument(
        "--l2-normalize",
        action="store_true",
        help="L2-normalize embeddings (default off)",
    )
    parser.add_argument(
        "--inline",
        action="store_true",
        help="store embeddings inline instead of a float32 sidecar",
    )
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        count = embed_corpus(
            args.corpus,
            args.roster,
            args.encoder,
            args.out,
            l2_normalize=args.l2_normalize,
            sidecar=not args.inline,
        )
    except EncoderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    print(f"embedded {count} rows -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
