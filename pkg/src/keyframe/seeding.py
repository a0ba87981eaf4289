"""Deterministic seed derivation shared by everything that draws randomness.

One root seed fans out to independent per-job streams by hashing
``"{root_seed}:{job_key}"``; the result does not depend on scheduling,
worker count, or iteration order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root_seed: int, key: str) -> int:
    digest = hashlib.sha256(f"{root_seed}:{key}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))
