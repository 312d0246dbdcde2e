"""Deterministic feature-hashed text embeddings.

A model-free stand-in for a sentence encoder: unit-norm vectors of any
dimension, computed from sha256 of the lowercased word tokens. The algorithm
is language-neutral (bytes of ``"{seed}:{token}"``) so the companion
precompute tool can emit byte-compatible files from another runtime.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def hashed_embedding(text: str, dim: int, seed: int = 0) -> np.ndarray:
    """Embed ``text`` into a unit-norm float64 vector of length ``dim``.

    Each token adds +/-1 to one bucket: the bucket is the first 8 digest
    bytes (big endian) mod dim, the sign is the parity of byte 8. Texts with
    no tokens, or whose contributions cancel exactly, fall back to a single
    seed-derived spike so the result is never the zero vector.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    vec = np.zeros(dim, dtype=np.float64)
    for token in _TOKEN_RE.findall(text.lower()):
        digest = hashlib.sha256(f"{seed}:{token}".encode("utf-8")).digest()
        bucket = int.from_bytes(digest[:8], "big") % dim
        sign = 1.0 if digest[8] % 2 == 0 else -1.0
        vec[bucket] += sign
    if not vec.any():
        digest = hashlib.sha256(f"{seed}:".encode("utf-8")).digest()
        vec[int.from_bytes(digest[:8], "big") % dim] = 1.0
    vec /= np.linalg.norm(vec)
    vec.setflags(write=False)
    return vec


class HashedEmbedder:
    """Callable embedder with a fixed dimension and seed (gateway default)."""

    def __init__(self, dim: int = 768, seed: int = 0):
        self.dim = int(dim)
        self.seed = int(seed)

    def __call__(self, text: str) -> np.ndarray:
        return hashed_embedding(text, self.dim, self.seed)
