"""Text embedding interface with a deterministic default implementation.

The default embedder is signed feature hashing: tokenize on
non-alphanumerics, case-fold, hash each token into one of d buckets with a
stable signed hash, and L2-normalize the nonzero result. It is fully
deterministic across runs and platforms, which is what correctness tests
and reproducible pipelines need. Retrieval-quality deployments can plug
any provider in behind the same interface; the store's manifest records
the embedder id so stores built with different embedders are never mixed
silently.
"""

from __future__ import annotations

import hashlib
import re
from typing import Protocol

import numpy as np

DEFAULT_DIMENSION = 256

_TOKEN = re.compile(r"[A-Za-z0-9]+")


class Embedder(Protocol):
    @property
    def dimension(self) -> int:
        ...

    @property
    def embedder_id(self) -> str:
        ...

    def embed(self, text: str) -> np.ndarray:
        """Return a float32 vector of length ``dimension``.

        Text with no tokens embeds to the zero vector; callers that need to
        index it must treat that as unembeddable.
        """
        ...


class HashingEmbedder:
    """Deterministic signed feature hashing at a fixed dimension."""

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self._dimension = dimension
        self._cache: dict[str, tuple[int, float]] = {}

    @property
    def dimension(self) -> int:
        return self._dimension

    @property
    def embedder_id(self) -> str:
        return f"feature-hash-{self._dimension}"

    def _slot(self, token: str) -> tuple[int, float]:
        slot = self._cache.get(token)
        if slot is None:
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
            value = int.from_bytes(digest, "little")
            slot = (value % self._dimension, 1.0 if value >> 63 == 0 else -1.0)
            self._cache[token] = slot
        return slot

    def embed(self, text: str) -> np.ndarray:
        acc = np.zeros(self._dimension, dtype=np.float64)
        for token in _TOKEN.findall(text.casefold()):
            bucket, sign = self._slot(token)
            acc[bucket] += sign
        norm = float(np.linalg.norm(acc))
        if norm > 0.0:
            acc /= norm
        return acc.astype(np.float32)

    def embed_many(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self._dimension), dtype=np.float32)
        for i, text in enumerate(texts):
            out[i] = self.embed(text)
        return out


def default_embedder_for(embedder_id: str) -> HashingEmbedder | None:
    """Reconstruct the default embedder from a manifest id, if it is one."""
    m = re.fullmatch(r"feature-hash-(\d+)", embedder_id)
    return HashingEmbedder(int(m.group(1))) if m else None
