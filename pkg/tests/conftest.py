from __future__ import annotations

import numpy as np
import pytest

from drew import ecc
from drew.pipeline import preprocess
from drew.synthetic import synthetic_store


@pytest.fixture(scope="session")
def default_spec() -> ecc.PolarCodeSpec:
    return ecc.construct_code(10, 100, 0.1)


@pytest.fixture(scope="session")
def small_store():
    """2000 x 32 store partitioned into 1024 clusters; shared read-only."""
    return preprocess(synthetic_store(2000, 32, seed=7), k=10, seed=7)


@pytest.fixture(scope="session")
def acceptance_store():
    """The desk-scale store the acceptance criteria run against."""
    return preprocess(synthetic_store(100_000, 64, seed=7), k=10, seed=7)


def brute_force_top(embeddings: np.ndarray, ids: np.ndarray, q: np.ndarray,
                    p: int = 1) -> list[tuple[int, float]]:
    """Independent reference scan: python sort on (-similarity, id)."""
    sims = [float(np.dot(row, q)) for row in embeddings]
    order = sorted(range(len(ids)), key=lambda i: (-sims[i], int(ids[i])))
    return [(int(ids[i]), sims[i]) for i in order[:p]]
