from __future__ import annotations

import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from bandit_router import core
from bandit_router.replay import SynthSpec, gen_synthetic, split_dataset

REPO_ROOT = Path(__file__).resolve().parents[1]
FIXTURES = REPO_ROOT / "fixtures"


def run_cli(*args: str, cwd=None) -> subprocess.CompletedProcess:
    env = dict(os.environ)
    env["PYTHONPATH"] = str(REPO_ROOT / "src") + os.pathsep + env.get("PYTHONPATH", "")
    return subprocess.run(
        [sys.executable, "-m", "bandit_router.cli", *args],
        capture_output=True,
        text=True,
        env=env,
        cwd=cwd,
    )


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture()
def tiny_dataset() -> core.RoutingDataset:
    return core.load_dataset(FIXTURES / "tiny.ds")


@pytest.fixture(scope="session")
def synth_pair():
    """A small 4-arm partition-map synthetic set, split for train/test."""
    spec = SynthSpec(
        n_arms=4,
        n_clusters=4,
        dim=16,
        n_records=1200,
        noise=0.02,
        costs=("0.02", "0.025", "0.1", "1.0"),
        seed=11,
    )
    return split_dataset(gen_synthetic(spec), 1000)


def make_dataset(
    correctness: list[tuple[int, ...]],
    prices: list[str],
    embeddings: list[list[float]] | None = None,
    tokens: list[tuple[int, ...]] | None = None,
) -> core.RoutingDataset:
    """Small literal datasets for targeted tests."""
    k = len(prices)
    n = len(correctness)
    if embeddings is None:
        embeddings = [[float(i + 1), float(i % 2)] for i in range(n)]
    dim = len(embeddings[0])
    if tokens is None:
        tokens = [(100,) * k for _ in range(n)]
    arms = core.build_roster((f"m{j}", prices[j]) for j in range(k))
    records = [
        core.QueryRecord(
            query_id=f"q{i}",
            embedding=np.asarray(embeddings[i], dtype=np.float32),
            correctness=tuple(correctness[i]),
            token_counts=tuple(tokens[i]),
        )
        for i in range(n)
    ]
    return core.RoutingDataset(arms=arms, records=records, embedding_dim=dim)
