from __future__ import annotations

import os
import subprocess
import sys
from pathlib import Path

PACKAGE_ROOT = Path(__file__).resolve().parents[1]
REPO_ROOT = PACKAGE_ROOT.parent
FIXTURES = REPO_ROOT / "fixtures"


def run_router_cli(*args: str) -> subprocess.CompletedProcess:
    """Invoke the router's CLI (its external interface) in a subprocess."""
    env = dict(os.environ)
    env["PYTHONPATH"] = str(REPO_ROOT / "src") + os.pathsep + env.get("PYTHONPATH", "")
    return subprocess.run(
        [sys.executable, "-m", "bandit_router.cli", *args],
        capture_output=True,
        text=True,
        env=env,
    )
