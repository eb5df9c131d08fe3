import os

import numpy as np
import pytest

from models.group_sparse import GenModelParams


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    """Run every test against the built-in defaults, whatever the shell exports."""
    for name in list(os.environ):
        if name.startswith("GENSENSE_"):
            monkeypatch.delenv(name, raising=False)


@pytest.fixture
def params_8_2():
    return GenModelParams(n=8, k=2, r=1.0, x_max=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def out_dir(tmp_path):
    return str(tmp_path / "run")


FAMILY_SIZE_LIMIT = 100000


def family_sweep(limit=FAMILY_SIZE_LIMIT, min_ratio=4):
    """Every (n, k) with n/k >= min_ratio and (2n/k)**k <= limit."""
    pairs = []
    for k in range(1, 7):
        ratio = min_ratio
        while (2 * ratio) ** k <= limit:
            pairs.append((ratio * k, k))
            ratio += 1
    return pairs


@pytest.fixture(scope="session")
def acceptance_pairs():
    return family_sweep()
