"""Deterministic text embeddings.

The default embedder hashes a bag of lowercased tokens into a fixed number of
signed buckets and L2-normalizes the result.  It is order-insensitive, has no
model dependencies, and produces identical vectors for identical text across
processes, which the rest of the engine relies on for reproducibility.  Any
callable with the same signature can be swapped in.
"""

from __future__ import annotations

import hashlib
from typing import Protocol

import numpy as np

from .errors import InvalidArgument, InvalidQuery
from .text import tokenize

# Collisions add ~n_tokens^2/dim of spurious cosine between unrelated texts;
# 2048 buckets keeps that noise floor well under the similarity thresholds
# used for seeding (0.5) and pattern formation (0.85).
DEFAULT_DIM = 2048


class Embedder(Protocol):
    """Anything that maps text to a unit vector of a fixed dimension."""

    dim: int

    def embed(self, text: str) -> np.ndarray: ...


def _token_hash(token: str) -> int:
    return int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "big")


class HashingEmbedder:
    """Signed feature hashing over whitespace/punctuation-split tokens."""

    def __init__(self, dim: int = DEFAULT_DIM) -> None:
        if dim < 2:
            raise InvalidArgument(f"embedding dimension must be >= 2, got {dim}")
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        tokens = tokenize(text)
        if not tokens:
            raise InvalidQuery("cannot embed empty text")
        out = np.zeros(self.dim, dtype=np.float64)
        for tok in tokens:
            h = _token_hash(tok)
            sign = 1.0 if (h >> 63) & 1 else -1.0
            out[h % self.dim] += sign
        norm = float(np.linalg.norm(out))
        if norm == 0.0:  # opposing tokens can cancel; keep a deterministic unit vector
            out[0] = 1.0
            norm = 1.0
        return out / norm
