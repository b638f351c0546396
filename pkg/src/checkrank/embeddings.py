"""Sentence vectors and word-similarity lookups behind pluggable backends.

Three interchangeable backends satisfy the same contract (one vector of
the configured dimension per input text, order-preserving):

* :class:`HashEmbedder`: offline fallback; a unit vector drawn from an
  RNG seeded by a stable hash of the normalized text, so the same text
  embeds identically across processes and runs.
* :class:`StoreBackend`: lookups into a precomputed :class:`VectorStore`.
* :class:`ServiceBackend`: HTTP client for an embedding service,
  ``POST /embed`` with ``{"texts": [...]}`` answering
  ``{"vectors": [[...], ...]}``.

Vector files are binary: magic ``CLRK``, u32 version, u32 dimension,
u64 count, then records of (u16 key length, key bytes, dimension
little-endian float32 values).
"""

from __future__ import annotations

import hashlib
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import requests

from .errors import ContractError, FormatError, MissingKeyError, TransportError

DEFAULT_DIMENSION = 768

STORE_MAGIC = b"CLRK"
STORE_VERSION = 1

SERVICE_URL_ENV = "CHECKRANK_EMBED_URL"
DEFAULT_PARALLELISM = 4
DEFAULT_BATCH_SIZE = 32
DEFAULT_TIMEOUT = 30.0
DEFAULT_RETRIES = 2


def normalize_text(text: str) -> str:
    """Trim, collapse internal whitespace, lowercase.

    Cache building and lookup must agree on this, so every key-producing
    path goes through here.
    """
    return " ".join(text.split()).lower()


def text_key(text: str) -> str:
    """Stable store key for a sentence: hash of the normalized text."""
    return hashlib.sha256(normalize_text(text).encode("utf-8")).hexdigest()


class VectorStore:
    """Immutable-by-convention map from key to fixed-dimension vector."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ContractError(f"dimension must be >= 1, got {dim}")
        self.dim = dim
        self._vectors: dict[str, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, key: str) -> bool:
        return key in self._vectors

    def keys(self) -> list[str]:
        return list(self._vectors)

    def put(self, key: str, vector: Sequence[float]) -> None:
        arr = np.asarray(vector, dtype=np.float32)
        if arr.shape != (self.dim,):
            raise ContractError(
                f"vector for {key!r} has shape {arr.shape}, "
                f"expected ({self.dim},)")
        if not np.all(np.isfinite(arr)):
            raise ContractError(f"vector for {key!r} has non-finite entries")
        self._vectors[key] = arr

    def get(self, key: str) -> np.ndarray:
        try:
            return self._vectors[key]
        except KeyError:
            raise MissingKeyError(f"key {key!r} not in vector store") from None

    def items(self):
        return self._vectors.items()


def save_vector_file(store: VectorStore, path: str | Path) -> None:
    """Serialize a store; keys are written in insertion order."""
    with Path(path).open("wb") as handle:
        handle.write(STORE_MAGIC)
        handle.write(struct.pack("<IIQ", STORE_VERSION, store.dim, len(store)))
        for key, vector in store.items():
            key_bytes = key.encode("utf-8")
            if len(key_bytes) > 0xFFFF:
                raise ContractError(f"key too long to serialize: {key[:40]!r}...")
            handle.write(struct.pack("<H", len(key_bytes)))
            handle.write(key_bytes)
            handle.write(vector.astype("<f4").tobytes())


def load_vector_file(path: str | Path) -> VectorStore:
    """Load a vector file, verifying magic, version, and record shapes."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < len(STORE_MAGIC) + 16:
        raise FormatError(f"{path}: truncated vector file header")
    if data[:4] != STORE_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    version, dim, count = struct.unpack_from("<IIQ", data, 4)
    if version != STORE_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    store = VectorStore(dim)
    offset = 20
    record_bytes = 4 * dim
    for _ in range(count):
        if offset + 2 > len(data):
            raise FormatError(f"{path}: truncated record header")
        (key_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + key_len + record_bytes > len(data):
            raise FormatError(f"{path}: truncated record payload")
        key = data[offset:offset + key_len].decode("utf-8")
        offset += key_len
        vector = np.frombuffer(data, dtype="<f4", count=dim, offset=offset)
        offset += record_bytes
        store.put(key, vector)
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes")
    return store


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    # Accumulate in float64 even for float32 store vectors.
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def nearest_word(word: str, store: VectorStore,
                 exclude_self: bool = True) -> tuple[str, float]:
    """Most cosine-similar stored word; ties favor the lexicographically
    smaller key."""
    if word not in store:
        raise MissingKeyError(f"word {word!r} not in vector store")
    if exclude_self and len(store) < 2:
        raise ContractError(
            "store needs at least 2 entries to exclude the query itself")
    query = store.get(word)
    best_key: Optional[str] = None
    best_sim = -np.inf
    for key in sorted(store.keys()):
        if exclude_self and key == word:
            continue
        sim = cosine_similarity(query, store.get(key))
        if sim > best_sim:
            best_key, best_sim = key, sim
    assert best_key is not None
    return best_key, best_sim


class HashEmbedder:
    """Deterministic offline embedder.

    The vector for a text is standard-normal noise seeded by the SHA-256
    of the normalized text, scaled to unit L2 norm. Identical normalized
    texts embed identically everywhere; distinct texts collide with
    negligible probability.
    """

    name = "fallback"

    def __init__(self, dim: int = DEFAULT_DIMENSION):
        if dim < 1:
            raise ContractError(f"dimension must be >= 1, got {dim}")
        self.dim = dim

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self._embed_one(t) for t in texts]

    def _embed_one(self, text: str) -> np.ndarray:
        digest = hashlib.sha256(normalize_text(text).encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:16], "big"))
        vector = rng.standard_normal(self.dim)
        norm = np.linalg.norm(vector)
        if norm == 0.0:
            vector[0] = 1.0
            norm = 1.0
        return vector / norm


class StoreBackend:
    """Backend serving vectors verbatim from a precomputed store.

    Texts are keyed by :func:`text_key`; any miss raises
    :class:`MissingKeyError` listing the offending texts.
    """

    name = "store"

    def __init__(self, store: VectorStore):
        self.store = store
        self.dim = store.dim

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        missing = [t for t in texts if text_key(t) not in self.store]
        if missing:
            raise MissingKeyError(
                f"{len(missing)} text(s) absent from vector store: "
                + "; ".join(repr(t) for t in missing[:5])
                + ("; ..." if len(missing) > 5 else ""))
        return [np.asarray(self.store.get(text_key(t)), dtype=np.float64)
                for t in texts]


class ServiceBackend:
    """HTTP embedding-service client with bounded request concurrency.

    Large batches are chunked; chunks may run concurrently (default 4
    workers) but outputs are restored to input order before returning.
    Non-200 answers, malformed bodies, and wrong-dimension vectors raise
    :class:`TransportError` after the configured retries.
    """

    name = "service"

    def __init__(self, url: str, dim: int = DEFAULT_DIMENSION,
                 timeout: float = DEFAULT_TIMEOUT,
                 retries: int = DEFAULT_RETRIES,
                 parallelism: int = DEFAULT_PARALLELISM,
                 batch_size: int = DEFAULT_BATCH_SIZE):
        if not url:
            raise ContractError("embedding service URL is empty")
        self.url = url.rstrip("/")
        self.dim = dim
        self.timeout = timeout
        self.retries = retries
        self.parallelism = max(1, parallelism)
        self.batch_size = max(1, batch_size)

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            return []
        chunks = [list(texts[i:i + self.batch_size])
                  for i in range(0, len(texts), self.batch_size)]
        if len(chunks) == 1:
            results = [self._request(chunks[0])]
        else:
            with ThreadPoolExecutor(max_workers=self.parallelism) as pool:
                results = list(pool.map(self._request, chunks))
        out: list[np.ndarray] = []
        for chunk_vectors in results:
            out.extend(chunk_vectors)
        return out

    def _request(self, texts: list[str]) -> list[np.ndarray]:
        payload = {"texts": texts}
        attempts = self.retries + 1
        last_error = "no attempt made"
        for _ in range(attempts):
            try:
                response = requests.post(
                    f"{self.url}/embed", json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = f"request failed: {exc}"
                continue
            if response.status_code != 200:
                last_error = f"service answered HTTP {response.status_code}"
                continue
            try:
                body = response.json()
            except (ValueError, json.JSONDecodeError):
                last_error = "service answered non-JSON body"
                continue
            vectors = body.get("vectors") if isinstance(body, dict) else None
            if not isinstance(vectors, list) or len(vectors) != len(texts):
                last_error = (
                    "service answered malformed body "
                    f"({len(vectors) if isinstance(vectors, list) else 'no'} "
                    f"vectors for {len(texts)} texts)")
                continue
            out = []
            for i, values in enumerate(vectors):
                arr = np.asarray(values, dtype=np.float64)
                if arr.shape != (self.dim,) or not np.all(np.isfinite(arr)):
                    raise TransportError(
                        f"service vector {i} has shape {arr.shape}, "
                        f"expected ({self.dim},)")
                out.append(arr)
            return out
        raise TransportError(
            f"{last_error} (after {attempts} attempt(s) to {self.url}/embed)")


Backend = HashEmbedder | StoreBackend | ServiceBackend


def embed_batch(texts: Sequence[str], backend: Backend) -> list[np.ndarray]:
    """Embed texts through any backend, enforcing the shared contract."""
    vectors = backend.embed_batch(texts)
    if len(vectors) != len(texts):
        raise ContractError(
            f"backend returned {len(vectors)} vectors for {len(texts)} texts")
    for vector in vectors:
        if vector.shape != (backend.dim,):
            raise ContractError(
                f"backend returned shape {vector.shape}, "
                f"expected ({backend.dim},)")
    return vectors


def build_text_store(texts: Iterable[str], backend: Backend) -> VectorStore:
    """Embed ``texts`` and cache them in a store keyed by normalized-text
    hash, ready for :class:`StoreBackend` and ``save_vector_file``."""
    unique: list[str] = []
    seen: set[str] = set()
    for text in texts:
        key = text_key(text)
        if key not in seen:
            seen.add(key)
            unique.append(text)
    store = VectorStore(backend.dim)
    vectors = embed_batch(unique, backend)
    for text, vector in zip(unique, vectors):
        store.put(text_key(text), vector)
    return store
