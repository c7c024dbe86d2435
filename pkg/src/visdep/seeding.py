"""Deterministic derivation of independent RNG streams.

Every stochastic stage of the pipeline (noise draws, shuffles, splits)
gets its own child seed derived from a root seed plus a label path, so
adding or removing one consumer never perturbs the streams of another.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK63 = (1 << 63) - 1


def derive_seed(root: int, *parts: int | str) -> int:
    """Hash (root, *parts) into a stable 63-bit child seed."""
    key = repr((int(root),) + tuple(parts)).encode("utf-8")
    digest = hashlib.sha256(key).digest()
    return int.from_bytes(digest[:8], "big") & _MASK63


def rng_for(root: int, *parts: int | str) -> np.random.Generator:
    """A fresh generator seeded from the derived child seed."""
    return np.random.default_rng(derive_seed(root, *parts))
