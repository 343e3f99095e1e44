"""Okapi BM25 inverted index over corpus premises.

Tokenization is lowercase + maximal alphanumeric runs (no stemming, no
stopword removal), the simplest deterministic scheme.  The IDF uses the
non-negative ``ln(1 + (N - df + 0.5)/(df + 0.5))`` form so scores never go
negative and top-k selection stays well behaved.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import LabeledCorpus

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric runs; underscores and punctuation split tokens."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.5
    b: float = 0.75

    def __post_init__(self) -> None:
        if self.k1 <= 0:
            raise ValueError(f"k1 must be positive, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


@dataclass
class Bm25Index:
    """Immutable-after-build inverted index.

    postings maps term -> {doc_id: term frequency}; doc_lengths maps
    doc_id -> token count.  avgdl is exact over the indexed set.
    """

    postings: dict[str, dict[str, int]] = field(default_factory=dict)
    doc_lengths: dict[str, int] = field(default_factory=dict)
    avgdl: float = 0.0
    doc_count: int = 0
    params: Bm25Params = field(default_factory=Bm25Params)

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))

    def to_json(self) -> str:
        obj = {
            "params": {"k1": self.params.k1, "b": self.params.b},
            "doc_count": self.doc_count,
            "avgdl": self.avgdl,
            "doc_lengths": self.doc_lengths,
            "postings": {
                term: sorted(docs.items()) for term, docs in self.postings.items()
            },
        }
        return json.dumps(obj, sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "Bm25Index":
        obj = json.loads(text)
        return cls(
            postings={t: {d: tf for d, tf in docs} for t, docs in obj["postings"].items()},
            doc_lengths=obj["doc_lengths"],
            avgdl=obj["avgdl"],
            doc_count=obj["doc_count"],
            params=Bm25Params(**obj["params"]),
        )

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "Bm25Index":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def build_index(corpus: LabeledCorpus, params: Bm25Params | None = None) -> Bm25Index:
    """Index every example's premise, keyed by example id."""
    if len(corpus) == 0:
        raise ValueError("cannot build an index over an empty corpus")
    index = Bm25Index(params=params or Bm25Params())
    total_len = 0
    for ex in corpus:
        tokens = tokenize(ex.premise)
        index.doc_lengths[ex.id] = len(tokens)
        total_len += len(tokens)
        for token in tokens:
            docs = index.postings.setdefault(token, {})
            docs[ex.id] = docs.get(ex.id, 0) + 1
    index.doc_count = len(corpus)
    index.avgdl = total_len / index.doc_count
    return index


def bm25_score(index: Bm25Index, query: str, doc_id: str) -> float:
    """BM25 relevance of one indexed document to a query.

    The sum runs over query token occurrences (a repeated query token
    contributes once per occurrence), and terms absent from the document
    contribute zero.
    """
    if doc_id not in index.doc_lengths:
        raise KeyError(f"unknown doc id {doc_id!r}")
    k1, b = index.params.k1, index.params.b
    doc_len = index.doc_lengths[doc_id]
    length_norm = k1 * (1.0 - b + b * doc_len / index.avgdl) if index.avgdl > 0 else k1
    score = 0.0
    for token in tokenize(query):
        tf = index.postings.get(token, {}).get(doc_id, 0)
        if tf == 0:
            continue
        score += index.idf(token) * tf * (k1 + 1.0) / (tf + length_norm)
    return score


def top_k_lexical(
    index: Bm25Index, query: str, candidates: list[str], k: int
) -> list[tuple[str, float]]:
    """The k highest-scoring candidates, ordered by (score desc, id asc)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not candidates:
        raise ValueError("candidate set must be non-empty")
    scored = [(doc_id, bm25_score(index, query, doc_id)) for doc_id in candidates]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]
