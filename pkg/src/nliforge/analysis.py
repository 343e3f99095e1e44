"""Read-only analytics over corpora and embedding stores: cross-dataset
TF-IDF cosine similarity, token-alignment F1, hypothesis length statistics,
frequent non-stopwords, and a per-metric retrieval benchmark.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .corpus import LabeledCorpus
from .embeddings import EmbeddingStore, SimilarityMetric, as_vector, top_k_semantic
from .lexical import tokenize

log = logging.getLogger(__name__)

# Fixed English stopword list, shipped in-repo so term rankings are
# reproducible regardless of installed NLP packages.
STOPWORDS = frozenset("""
a about above after again against all am an and any are aren't as at be
because been before being below between both but by can cannot could couldn't
did didn't do does doesn't doing don't down during each few for from further
had hadn't has hasn't have haven't having he her here hers herself him himself
his how i if in into is isn't it its itself just me more most my myself no
nor not of off on once only or other our ours ourselves out over own s same
she should shouldn't so some such t than that the their theirs them themselves
then there these they this those through to too under until up very was wasn't
we were weren't what when where which while who whom why will with won't would
wouldn't you your yours yourself yourselves
""".split())


@dataclass
class DatasetVector:
    """One dataset's sparse term-weight vector."""

    name: str
    tfidf: dict[str, float]


@dataclass
class SimilarityReport:
    names: list[str]
    matrix: np.ndarray
    metric: str

    def to_csv(self) -> str:
        lines = ["," + ",".join(self.names)]
        for name, row in zip(self.names, self.matrix):
            lines.append(name + "," + ",".join(f"{v:.6f}" for v in row))
        return "\n".join(lines) + "\n"

    def to_record(self) -> dict:
        return {
            "metric": self.metric,
            "names": list(self.names),
            "matrix": [[float(v) for v in row] for row in self.matrix],
        }


class BertScore(NamedTuple):
    precision: float
    recall: float
    f1: float


def _corpus_terms(corpus: LabeledCorpus) -> Counter:
    counts: Counter = Counter()
    for ex in corpus.examples:
        counts.update(tokenize(ex.premise))
        if ex.hypothesis is not None:
            counts.update(tokenize(ex.hypothesis))
    return counts


def _dataset_name(corpus: LabeledCorpus, index: int) -> str:
    if corpus.examples and corpus.examples[0].source:
        return corpus.examples[0].source
    return f"dataset-{index}"


def tfidf_vectors(datasets: list[LabeledCorpus],
                  names: list[str] | None = None) -> list[DatasetVector]:
    """Weight each dataset's raw term counts by ln(N / DF).

    DF counts datasets, not documents, so a term present everywhere
    weighs exactly zero.
    """
    if len(datasets) < 2:
        raise ValueError(f"need at least 2 datasets, got {len(datasets)}")
    if names is None:
        names = [_dataset_name(ds, i) for i, ds in enumerate(datasets)]
    if len(names) != len(datasets):
        raise ValueError(f"{len(names)} names for {len(datasets)} datasets")
    term_counts = [_corpus_terms(ds) for ds in datasets]
    df: Counter = Counter()
    for counts in term_counts:
        df.update(counts.keys())
    n = len(datasets)
    vectors = []
    for name, counts in zip(names, term_counts):
        weights = {term: tf * math.log(n / df[term]) for term, tf in counts.items()}
        vectors.append(DatasetVector(name=name, tfidf=weights))
    return vectors


def tfidf_matrix(datasets: list[LabeledCorpus],
                 names: list[str] | None = None) -> SimilarityReport:
    """Pairwise cosine similarity between dataset TF-IDF vectors.

    A dataset whose vector is all-zero (every term universal) gets a zero
    row and column, diagonal included, with a logged warning.
    """
    vectors = tfidf_vectors(datasets, names)
    vocab = sorted({term for vec in vectors for term in vec.tfidf})
    dense = np.zeros((len(vectors), max(len(vocab), 1)))
    for i, vec in enumerate(vectors):
        for j, term in enumerate(vocab):
            dense[i, j] = vec.tfidf.get(term, 0.0)
    norms = np.linalg.norm(dense, axis=1)
    for i, norm in enumerate(norms):
        if norm == 0.0:
            log.warning("dataset %s has an all-zero weight vector; "
                        "reporting zero similarity", vectors[i].name)
    # zero-norm rows are all-zero already, so dividing by 1 keeps them zero
    scaled = dense / np.where(norms == 0.0, 1.0, norms)[:, None]
    matrix = scaled @ scaled.T
    np.fill_diagonal(matrix, np.where(norms > 0.0, 1.0, 0.0))
    matrix = (matrix + matrix.T) / 2.0
    return SimilarityReport(names=[v.name for v in vectors], matrix=matrix,
                            metric="tfidf-cosine")


def _unit_rows(vectors: list) -> np.ndarray:
    rows = np.stack([as_vector(v) for v in vectors])
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    return rows / np.where(norms == 0.0, 1.0, norms)


def bertscore_f1(tokens_a: list, tokens_b: list) -> BertScore:
    """Greedy token-alignment score between two embedded token sequences.

    Precision averages each a-token's best cosine against b, recall the
    reverse, and F1 is their harmonic mean (0 when both are 0).  No IDF
    weighting is applied.
    """
    if not tokens_a or not tokens_b:
        raise ValueError("token sequences must be non-empty")
    a = _unit_rows(tokens_a)
    b = _unit_rows(tokens_b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    sims = a @ b.T
    precision = float(sims.max(axis=1).mean())
    recall = float(sims.max(axis=0).mean())
    if precision + recall == 0.0:
        return BertScore(precision, recall, 0.0)
    f1 = 2.0 * precision * recall / (precision + recall)
    return BertScore(precision, recall, float(f1))


def bertscore_report(token_sets: list[list], names: list[str]) -> SimilarityReport:
    """Pairwise F1 between embedded token sequences, as a similarity matrix."""
    if len(token_sets) != len(names):
        raise ValueError(f"{len(names)} names for {len(token_sets)} token sets")
    n = len(token_sets)
    matrix = np.zeros((n, n))
    for i in range(n):
        matrix[i, i] = bertscore_f1(token_sets[i], token_sets[i]).f1
        for j in range(i + 1, n):
            score = bertscore_f1(token_sets[i], token_sets[j]).f1
            matrix[i, j] = matrix[j, i] = score
    return SimilarityReport(names=list(names), matrix=matrix, metric="bertscore-f1")


def length_stats(corpus: LabeledCorpus) -> dict[str, float]:
    """Mean hypothesis length in Unicode characters and tokenizer words."""
    hypotheses = [ex.hypothesis for ex in corpus.examples if ex.hypothesis is not None]
    if not hypotheses:
        raise ValueError("corpus has no hypotheses to measure")
    return {
        "mean_chars": sum(len(h) for h in hypotheses) / len(hypotheses),
        "mean_words": sum(len(tokenize(h)) for h in hypotheses) / len(hypotheses),
    }


def top_terms(corpus: LabeledCorpus, n: int) -> list[tuple[str, int]]:
    """The n most frequent non-stopword tokens, ties broken by term."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    counts = _corpus_terms(corpus)
    ranked = sorted(
        ((term, count) for term, count in counts.items() if term not in STOPWORDS),
        key=lambda item: (-item[1], item[0]),
    )
    return ranked[:n]


def metric_benchmark(store: EmbeddingStore, corpus: LabeledCorpus,
                     k: int) -> dict[str, float]:
    """Label-match@k for every similarity metric, averaged over all queries.

    Each example queries the rest of the corpus; the score is the fraction
    of its top-k neighbors sharing its label.
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    missing = [ex.id for ex in corpus.examples if ex.id not in store]
    if missing:
        raise ValueError(f"no embedding for id {missing[0]!r}")
    if len(corpus.examples) < 2:
        raise ValueError("need at least 2 examples to benchmark retrieval")
    all_ids = [ex.id for ex in corpus.examples]
    results: dict[str, float] = {}
    for metric in SimilarityMetric:
        total = 0.0
        for ex in corpus.examples:
            candidates = [other for other in all_ids if other != ex.id]
            ranked = top_k_semantic(store, store.get(ex.id), candidates,
                                    min(k, len(candidates)), metric)
            hits = sum(1 for cand_id, _ in ranked
                       if corpus.get(cand_id).label == ex.label)
            total += hits / len(ranked)
        results[metric.value] = total / len(corpus.examples)
    return results
