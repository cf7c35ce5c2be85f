"""Named RNG substreams for reproducible simulation runs.

Every stochastic component draws from its own labelled substream derived
from a single master seed.  Streams with distinct labels are statistically
independent, so adding draws to one component (say, embedding noise) never
shifts the values another component (say, key bit flips) sees.
"""
from __future__ import annotations

import hashlib

import numpy as np


def substream(master_seed: int, label: str) -> np.random.Generator:
    """Return a PCG64 generator keyed by ``(master_seed, label)``.

    The label is hashed (SHA-256, first 128 bits) and folded into the seed
    material, so the same pair always reproduces bit-identical draws and
    different labels give independent streams.
    """
    seed = int(master_seed)
    if seed < 0:
        raise ValueError("master seed must be non-negative")
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in (0, 4, 8, 12)]
    return np.random.default_rng(np.random.SeedSequence([seed] + words))
