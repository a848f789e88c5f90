import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

REPO = Path(__file__).resolve().parent.parent
DEMO = REPO / "demo"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def demo_dir():
    required = ("source.png", "reference.png", "source_mask.png",
                "reference_mask.png", "config.json", "config_k1.json")
    missing = [name for name in required if not (DEMO / name).exists()]
    if missing:
        subprocess.run([sys.executable, str(REPO / "scripts" / "make_demo.py")],
                       check=True)
    return DEMO


def run_cli(*args, env_extra=None):
    env = dict(os.environ)
    if env_extra:
        env.update(env_extra)
    return subprocess.run([sys.executable, "-m", "regionstyle.cli", *map(str, args)],
                          capture_output=True, env=env)
