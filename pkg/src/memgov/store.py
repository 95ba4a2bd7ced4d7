"""The experiential memory: indexing, search, dedup, and persistence.

Retrieval embeds only the index layer (problem summary plus signals); the
resolution layer never influences ranking. The normative ranking semantics
is an exhaustive flat scan by cosine similarity with ties broken by card id
ascending; any accelerated structure must reproduce it exactly.

On-disk layout (one directory per store):

* cards.jsonl    -- one serialized card per line, in indexing order
* vectors.bin    -- magic "MEMGIDX1", little-endian u32 count, u32
                    dimension, count*dimension little-endian float32 values
                    row-major (rows aligned with cards.jsonl), then a
                    little-endian u64 FNV-1a checksum of all preceding bytes
* manifest.json  -- {format_version, dimension, count, embedder_id}
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cards import ExperienceCard, IndexLayer, card_from_dict, card_to_dict
from .embedding import Embedder, default_embedder_for
from .errors import (
    ChecksumError,
    DataError,
    DuplicateCardError,
    StoreFormatError,
    UnembeddableTextError,
    UnknownCardError,
)

MAGIC = b"MEMGIDX1"
FORMAT_VERSION = 1
DEFAULT_TOP_K = 10
DEFAULT_DEDUP_THRESHOLD = 0.95

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

try:
    import numba

    @numba.njit(cache=True, nogil=True)
    def _fnv1a_words(data):  # pragma: no cover - exercised via fnv1a_64
        h = numba.uint64(_FNV_OFFSET)
        p = numba.uint64(_FNV_PRIME)
        for i in range(data.shape[0]):
            h = (h ^ numba.uint64(data[i])) * p
        return h

    def fnv1a_64(data: bytes) -> int:
        return int(_fnv1a_words(np.frombuffer(data, dtype=np.uint8)))

except ImportError:  # pragma: no cover - numba is a declared dependency

    def fnv1a_64(data: bytes) -> int:
        h = _FNV_OFFSET
        for b in data:
            h = ((h ^ b) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
        return h


@dataclass(frozen=True)
class IndexEntry:
    card_id: str
    vector: np.ndarray  # float32, length = store dimension, nonzero norm
    index_text: str


@dataclass(frozen=True)
class SearchHit:
    card_id: str
    similarity: float
    preview: IndexLayer


def compose_index_text(card: ExperienceCard) -> str:
    """The exact text that gets embedded: summary plus signals, resolution
    layer excluded by construction."""
    return card.index.problem_summary + "\n" + "; ".join(card.index.signals)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of two nonzero vectors, clamped into [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DataError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise UnembeddableTextError("cosine similarity undefined for zero-norm vectors")
    return min(1.0, max(-1.0, float(np.dot(a, b)) / (na * nb)))


class MemoryStore:
    """In-memory card collection with flat-scan retrieval.

    Reads (search, browse) are safe to run concurrently over a loaded
    store; writes (index_card, save) require exclusive access.
    """

    def __init__(self, embedder: Embedder):
        self.embedder = embedder
        self._ids: list[str] = []
        self._cards: dict[str, ExperienceCard] = {}
        self._rows: list[np.ndarray] = []
        self._cache: _SearchCache | None = None

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def dimension(self) -> int:
        return self.embedder.dimension

    def card_ids(self) -> list[str]:
        return list(self._ids)

    def index_card(self, card: ExperienceCard) -> str:
        """Embed the card's index layer and add it to the store."""
        if card.card_id in self._cards:
            raise DuplicateCardError(f"card id already indexed: {card.card_id}")
        text = compose_index_text(card)
        vector = np.asarray(self.embedder.embed(text), dtype=np.float32)
        if vector.shape != (self.dimension,):
            raise DataError(
                f"embedder returned shape {vector.shape}, expected ({self.dimension},)"
            )
        if not float(np.linalg.norm(vector)) > 0.0:
            raise UnembeddableTextError(
                f"index text of card {card.card_id!r} embeds to the zero vector"
            )
        self._append(card, vector)
        return card.card_id

    def _append(self, card: ExperienceCard, vector: np.ndarray) -> None:
        self._ids.append(card.card_id)
        self._cards[card.card_id] = card
        self._rows.append(vector)
        self._cache = None

    def entries(self) -> list[IndexEntry]:
        # index_text is derivable: it is compose_index_text(card) by
        # construction on both the indexing and loading paths.
        return [
            IndexEntry(card_id=i, vector=v, index_text=compose_index_text(self._cards[i]))
            for i, v in zip(self._ids, self._rows)
        ]

    def browse(self, card_id: str) -> ExperienceCard:
        """Return the full stored card, resolution layer included."""
        card = self._cards.get(card_id)
        if card is None:
            raise UnknownCardError(f"no card with id {card_id!r}")
        return card

    def _ensure_cache(self) -> "_SearchCache":
        if self._cache is None:
            self._cache = _SearchCache.build(self._ids, self._rows)
        return self._cache

    def search(self, query: str, k: int = DEFAULT_TOP_K) -> list[SearchHit]:
        """Top-k flat scan by cosine similarity, ties by card id ascending."""
        if k < 1:
            raise DataError(f"k must be >= 1, got {k}")
        if not self._ids:
            return []
        q = np.asarray(self.embedder.embed(query), dtype=np.float64)
        qnorm = float(np.linalg.norm(q))
        if qnorm == 0.0:
            raise UnembeddableTextError("query embeds to the zero vector")
        cache = self._ensure_cache()
        sims = cache.similarities(q, qnorm)
        order = np.lexsort((cache.id_array, -sims))[:k]
        return [
            SearchHit(
                card_id=self._ids[i],
                similarity=float(sims[i]),
                preview=self._cards[self._ids[i]].index,
            )
            for i in order
        ]

    def save(self, directory: str | Path) -> None:
        """Persist cards, vectors, and manifest; load() restores exactly."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with (directory / "cards.jsonl").open("w") as fh:
            for card_id in self._ids:
                fh.write(json.dumps(card_to_dict(self._cards[card_id])) + "\n")
        count = len(self._ids)
        matrix = (
            np.stack(self._rows) if count else np.zeros((0, self.dimension), dtype=np.float32)
        )
        payload = (
            MAGIC
            + struct.pack("<II", count, self.dimension)
            + matrix.astype("<f4", copy=False).tobytes(order="C")
        )
        checksum = struct.pack("<Q", fnv1a_64(payload))
        (directory / "vectors.bin").write_bytes(payload + checksum)
        manifest = {
            "format_version": FORMAT_VERSION,
            "dimension": self.dimension,
            "count": count,
            "embedder_id": self.embedder.embedder_id,
        }
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    @classmethod
    def load(cls, directory: str | Path, embedder: Embedder | None = None) -> "MemoryStore":
        """Load a persisted store, verifying layout and checksum.

        When no embedder is passed, the manifest's embedder id must name a
        default embedder; an explicitly passed embedder must match the
        manifest so different embedders are never mixed.
        """
        directory = Path(directory)
        manifest_path = directory / "manifest.json"
        if not manifest_path.is_file():
            raise StoreFormatError(f"no store at {directory} (missing manifest.json)")
        manifest = json.loads(manifest_path.read_text())
        if manifest.get("format_version") != FORMAT_VERSION:
            raise StoreFormatError(
                f"unsupported format_version {manifest.get('format_version')!r}"
            )
        dimension = int(manifest["dimension"])
        count = int(manifest["count"])
        embedder_id = manifest["embedder_id"]

        if embedder is None:
            embedder = default_embedder_for(embedder_id)
            if embedder is None:
                raise StoreFormatError(
                    f"store was built with embedder {embedder_id!r}; pass that embedder to load()"
                )
        elif embedder.embedder_id != embedder_id:
            raise StoreFormatError(
                f"embedder mismatch: store has {embedder_id!r}, got {embedder.embedder_id!r}"
            )
        if embedder.dimension != dimension:
            raise StoreFormatError(
                f"dimension mismatch: manifest {dimension}, embedder {embedder.dimension}"
            )

        vectors_path = directory / "vectors.bin"
        if not vectors_path.is_file():
            raise StoreFormatError(f"store at {directory} is missing vectors.bin")
        raw = vectors_path.read_bytes()
        header = len(MAGIC) + 8
        if len(raw) < header + 8:
            raise StoreFormatError("vectors.bin truncated (no room for header and checksum)")
        if raw[: len(MAGIC)] != MAGIC:
            raise StoreFormatError("vectors.bin has wrong magic bytes (version mismatch?)")
        file_count, file_dim = struct.unpack_from("<II", raw, len(MAGIC))
        if (file_count, file_dim) != (count, dimension):
            raise StoreFormatError(
                f"vectors.bin header ({file_count}, {file_dim}) disagrees with manifest "
                f"({count}, {dimension})"
            )
        expected_len = header + count * dimension * 4 + 8
        if len(raw) != expected_len:
            raise StoreFormatError(
                f"vectors.bin is {len(raw)} bytes, expected {expected_len} (truncated?)"
            )
        (stored_sum,) = struct.unpack_from("<Q", raw, expected_len - 8)
        if fnv1a_64(raw[:-8]) != stored_sum:
            raise ChecksumError("vectors.bin failed checksum verification")
        matrix = np.frombuffer(raw, dtype="<f4", count=count * dimension, offset=header)
        matrix = matrix.reshape(count, dimension)

        cards_path = directory / "cards.jsonl"
        if not cards_path.is_file():
            raise StoreFormatError(f"store at {directory} is missing cards.jsonl")
        store = cls(embedder)
        blob = cards_path.read_bytes()
        for lineno, line in enumerate(blob.splitlines()):
            if lineno >= count:
                raise StoreFormatError("cards.jsonl has more lines than manifest count")
            try:
                card = card_from_dict(json.loads(line))
            except (json.JSONDecodeError, DataError) as exc:
                raise StoreFormatError(f"cards.jsonl line {lineno + 1}: {exc}") from exc
            store._append(card, matrix[lineno])
        if len(store) != count:
            raise StoreFormatError(
                f"cards.jsonl has {len(store)} cards, manifest says {count}"
            )
        return store


class _SearchCache:
    """Float64 scan matrix plus per-row norms.

    Similarities are computed with einsum rather than BLAS gemv: einsum's
    per-row reduction is a pure function of row content, so vectors with
    mathematically equal similarity land on exactly equal floats and the
    card-id tie-break engages deterministically, matching a per-pair
    cosine_similarity scan. The norms come from the same per-vector routine
    cosine_similarity uses.
    """

    def __init__(self, id_array: np.ndarray, matrix: np.ndarray, norms: np.ndarray):
        self.id_array = id_array
        self.matrix = matrix
        self.norms = norms

    @classmethod
    def build(cls, ids: list[str], rows: list[np.ndarray]) -> "_SearchCache":
        matrix = np.stack(rows).astype(np.float64)
        norms = np.array([float(np.linalg.norm(row)) for row in matrix])
        return cls(np.array(ids), matrix, norms)

    def similarities(self, q: np.ndarray, qnorm: float) -> np.ndarray:
        sims = np.einsum("ij,j->i", self.matrix, q) / (self.norms * qnorm)
        np.clip(sims, -1.0, 1.0, out=sims)
        return sims


def _normalized_text(text: str) -> str:
    return " ".join(text.casefold().split())


def dedup(
    cards: list[ExperienceCard],
    embedder: Embedder,
    threshold: float = DEFAULT_DEDUP_THRESHOLD,
) -> list[ExperienceCard]:
    """Collapse duplicates, keeping the lexicographically smallest source.

    Stage 1 groups exact duplicates (hash of normalized index text); stage
    2 groups near-duplicates (cosine >= threshold). Groups are merged
    transitively, each keeps the card with the smallest (repo, issue, pr),
    and survivors preserve input order -- which makes dedup idempotent.
    """
    n = len(cards)
    if n <= 1:
        return list(cards)

    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    texts = [compose_index_text(c) for c in cards]
    by_text: dict[str, int] = {}
    for i, text in enumerate(texts):
        key = _normalized_text(text)
        if key in by_text:
            union(by_text[key], i)
        else:
            by_text[key] = i

    matrix = np.stack([embedder.embed(t) for t in texts]).astype(np.float64)
    norms = np.linalg.norm(matrix, axis=1)
    embeddable = norms > 0.0
    # Chunked pairwise scan keeps memory bounded on large inputs.
    chunk = 512
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        block = matrix[start:stop] @ matrix.T
        for i in range(start, stop):
            if not embeddable[i]:
                continue
            row = block[i - start]
            for j in range(i + 1, n):
                if embeddable[j] and row[j] / (norms[i] * norms[j]) >= threshold:
                    union(i, j)

    best: dict[int, int] = {}
    for i, card in enumerate(cards):
        root = find(i)
        if root not in best or card.source.as_tuple() < cards[best[root]].source.as_tuple():
            best[root] = i
    keep = set(best.values())
    return [card for i, card in enumerate(cards) if i in keep]
