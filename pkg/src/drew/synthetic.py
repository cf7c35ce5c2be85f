"""Synthetic corpora: i.i.d. uniform unit-sphere embeddings."""
from __future__ import annotations

import numpy as np

from .rng import substream
from .store import Store, _quantize_unit


def synthetic_embeddings(count: int, d: int, seed: int, label: str = "store") -> np.ndarray:
    """(count, d) unit vectors, uniform on the sphere, from a named stream."""
    if count < 1 or d < 1:
        raise ValueError("count and d must be positive")
    rng = substream(seed, f"synthetic/{label}")
    vecs = rng.standard_normal((count, d))
    return _quantize_unit(vecs)


def synthetic_store(count: int, d: int, seed: int) -> Store:
    """Unclustered store with ids 0..count-1 and synthetic embeddings."""
    emb = synthetic_embeddings(count, d, seed, label="store")
    return Store(ids=np.arange(count, dtype=np.uint64), embeddings=emb)


def heldout_pool(count: int, d: int, seed: int) -> np.ndarray:
    """Embeddings for out-of-dataset queries, independent of the store draw."""
    return synthetic_embeddings(count, d, seed, label="heldout")
