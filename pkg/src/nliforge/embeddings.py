"""Premise embeddings: storage, similarity metrics, and the provider client.

Vectors are float64 numpy arrays.  Degenerate cases follow fixed total
conventions so the pipeline never dies on a weird embedding: cosine with a
zero-norm operand is 0, Bray-Curtis with a zero denominator is 0, and
Canberra components with |a_i| + |b_i| = 0 contribute 0.
"""

from __future__ import annotations

import enum
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import LabeledCorpus
from .wire import ModelEndpoint, Transport, post_with_retries

VEMB_MAGIC = b"VEMB"
VEMB_VERSION = 1


class SimilarityMetric(str, enum.Enum):
    COSINE = "cosine"
    DOT = "dot"
    L2 = "l2"
    L1 = "l1"
    BRAY_CURTIS = "bray_curtis"
    CANBERRA = "canberra"

    @property
    def higher_is_better(self) -> bool:
        return self in (SimilarityMetric.COSINE, SimilarityMetric.DOT)


def as_vector(values) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise ValueError("embedding must be a non-empty 1-D vector")
    if not np.all(np.isfinite(vec)):
        raise ValueError("embedding contains non-finite components")
    return vec


def measure(metric: SimilarityMetric, a: np.ndarray, b: np.ndarray) -> float:
    """One similarity or distance value between two equal-dim vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if metric == SimilarityMetric.COSINE:
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0.0 or nb == 0.0:
            return 0.0
        return float(a @ b / (na * nb))
    if metric == SimilarityMetric.DOT:
        return float(a @ b)
    if metric == SimilarityMetric.L2:
        return float(np.linalg.norm(a - b))
    if metric == SimilarityMetric.L1:
        return float(np.abs(a - b).sum())
    if metric == SimilarityMetric.BRAY_CURTIS:
        denom = float(np.abs(a + b).sum())
        if denom == 0.0:
            return 0.0
        return float(np.abs(a - b).sum() / denom)
    if metric == SimilarityMetric.CANBERRA:
        denom = np.abs(a) + np.abs(b)
        num = np.abs(a - b)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(denom > 0.0, num / np.where(denom > 0.0, denom, 1.0), 0.0)
        return float(terms.sum())
    raise ValueError(f"unknown metric {metric!r}")


@dataclass
class EmbeddingStore:
    """Maps example id -> vector; all vectors share one dimensionality."""

    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    dim: int = 0
    model_id: str = ""

    def add(self, example_id: str, vector) -> None:
        vec = as_vector(vector)
        if self.dim == 0:
            self.dim = vec.size
        elif vec.size != self.dim:
            raise ValueError(
                f"vector for {example_id!r} has dim {vec.size}, store has dim {self.dim}"
            )
        if example_id in self.vectors:
            raise ValueError(f"duplicate embedding id {example_id!r}")
        self.vectors[example_id] = vec

    def get(self, example_id: str) -> np.ndarray:
        try:
            return self.vectors[example_id]
        except KeyError:
            raise KeyError(f"no embedding for id {example_id!r}") from None

    def __contains__(self, example_id: str) -> bool:
        return example_id in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)


def top_k_semantic(store: EmbeddingStore, query: np.ndarray, candidates: list[str],
                   k: int, metric: SimilarityMetric = SimilarityMetric.COSINE
                   ) -> list[tuple[str, float]]:
    """k best candidates under the metric's orientation, ties by id ascending."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    query = as_vector(query)
    scored = [(cid, measure(metric, query, store.get(cid))) for cid in candidates]
    sign = -1.0 if metric.higher_is_better else 1.0
    scored.sort(key=lambda item: (sign * item[1], item[0]))
    return scored[:k]


# --- persistence ----------------------------------------------------------

def save_store_jsonl(store: EmbeddingStore, path: str | Path) -> Path:
    """JSONL records {"id", "dim", "vector"}, one per embedding."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for example_id, vec in store.vectors.items():
            rec = {"id": example_id, "dim": int(vec.size), "vector": vec.tolist()}
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return path


def load_store_jsonl(path: str | Path, model_id: str = "") -> EmbeddingStore:
    store = EmbeddingStore(model_id=model_id)
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            store.add(rec["id"], rec["vector"])
    return store


def save_store_vemb(store: EmbeddingStore, path: str | Path) -> Path:
    """Packed binary format for large stores.

    Layout (little-endian): magic "VEMB", version u32, dim u32, count u64,
    then per record: id-length u32, id bytes, dim float32 values.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(VEMB_MAGIC)
        fh.write(struct.pack("<IIQ", VEMB_VERSION, store.dim, len(store.vectors)))
        for example_id, vec in store.vectors.items():
            id_bytes = example_id.encode("utf-8")
            fh.write(struct.pack("<I", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(vec.astype("<f4").tobytes())
    return path


def load_store_vemb(path: str | Path, model_id: str = "") -> EmbeddingStore:
    data = Path(path).read_bytes()
    if data[:4] != VEMB_MAGIC:
        raise ValueError(f"{path}: not a VEMB file")
    version, dim, count = struct.unpack_from("<IIQ", data, 4)
    if version != VEMB_VERSION:
        raise ValueError(f"{path}: unsupported VEMB version {version}")
    store = EmbeddingStore(model_id=model_id)
    offset = 4 + 16
    for _ in range(count):
        (id_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        example_id = data[offset:offset + id_len].decode("utf-8")
        offset += id_len
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).astype(np.float64)
        offset += 4 * dim
        store.add(example_id, vec)
    return store


def load_store(path: str | Path, model_id: str = "") -> EmbeddingStore:
    """Load a store by sniffing the format (VEMB magic vs JSONL)."""
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(4)
    if magic == VEMB_MAGIC:
        return load_store_vemb(path, model_id)
    return load_store_jsonl(path, model_id)


# --- provider client ------------------------------------------------------

def fetch_embeddings(endpoint: ModelEndpoint, texts: list[str],
                     transport: Transport | None = None) -> list[np.ndarray]:
    """Fetch one vector per text, in input order.

    Wire shape: request {"model", "input": [...]}, response
    {"data": [{"index", "embedding"}, ...]}.
    """
    if not texts:
        raise ValueError("texts must be non-empty")
    payload = {"model": endpoint.model_id, "input": list(texts)}
    response = post_with_retries(endpoint, endpoint.base_url, payload, transport)
    try:
        data = response["data"]
    except (KeyError, TypeError):
        raise ValueError("embedding response missing 'data'") from None
    if len(data) != len(texts):
        raise ValueError(f"count mismatch: sent {len(texts)} texts, got {len(data)} vectors")
    ordered = sorted(data, key=lambda item: item["index"])
    vectors = [as_vector(item["embedding"]) for item in ordered]
    dims = {v.size for v in vectors}
    if len(dims) > 1:
        raise ValueError(f"dim disagreement across batch: {sorted(dims)}")
    return vectors


def embed_corpus(endpoint: ModelEndpoint, corpus: LabeledCorpus,
                 store_path: str | Path | None = None, batch_size: int = 32,
                 transport: Transport | None = None) -> EmbeddingStore:
    """Embed every premise, reusing the store file as a cache.

    Already-present ids are never re-fetched, so a rerun over an unchanged
    corpus is network-free.  The store file is rewritten in corpus order,
    which keeps its bytes deterministic.
    """
    cached = EmbeddingStore(model_id=endpoint.model_id)
    if store_path is not None and Path(store_path).exists():
        cached = load_store(store_path, model_id=endpoint.model_id)
    missing = [ex for ex in corpus if ex.id not in cached]
    if missing:
        batches = [missing[i:i + batch_size] for i in range(0, len(missing), batch_size)]

        def fetch_batch(batch):
            return fetch_embeddings(endpoint, [ex.premise for ex in batch], transport)

        # post_with_retries holds the endpoint's in-flight semaphore, so
        # worker count just needs to be >= max_in_flight to saturate it.
        with ThreadPoolExecutor(max_workers=endpoint.max_in_flight) as pool:
            results = list(pool.map(fetch_batch, batches))
        for batch, vectors in zip(batches, results):
            for ex, vec in zip(batch, vectors):
                cached.add(ex.id, vec)
    store = EmbeddingStore(model_id=endpoint.model_id)
    for ex in corpus:
        store.add(ex.id, cached.get(ex.id))
    if store_path is not None:
        save_store_jsonl(store, store_path)
    return store
