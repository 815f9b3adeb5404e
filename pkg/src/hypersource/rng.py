"""Counter-based random streams.

Every stochastic sub-task draws from a Philox generator keyed by the base
seed and a stable task path; the element index goes into the counter.  Two
evaluations of the same ``(seed, path, index)`` therefore see the same
numbers regardless of evaluation order or worker count.
"""
from __future__ import annotations

import hashlib

import numpy as np


def task_key(seed: int, path: str) -> int:
    digest = hashlib.blake2b(f"{int(seed)}/{path}".encode(), digest_size=16).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, path: str, index: int = 0) -> np.random.Generator:
    # index occupies the second counter word; draws advance the first
    return np.random.Generator(np.random.Philox(key=task_key(seed, path), counter=int(index) << 64))


def poisson_counts(means: np.ndarray, seed: int, path: str) -> np.ndarray:
    """One Poisson draw per element, element ``k`` from its own counter block."""
    means = np.asarray(means, dtype=float)
    flat = means.ravel()
    out = np.empty(flat.shape, dtype=np.int64)
    for k, lam in enumerate(flat):
        out[k] = stream(seed, path, k).poisson(max(lam, 0.0))
    return out.reshape(means.shape)
