"""Balanced few-shot context retrieval with lexical/semantic score fusion.

Three modes share one contract: per label, score every candidate other than
the query itself, take the top k by (score desc, id asc), and union the
three label slices into a balanced context of 3k shots.  Combined mode
z-normalizes each score family over the query's full candidate pool and
interpolates with weight alpha.

The alpha tuner sweeps a grid, scoring every (query, candidate) pair for
binary same-label relevance and pooling all pairs into one ROC AUC per
grid point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import LABELS, ExamplePair, LabeledCorpus, NliLabel
from .embeddings import EmbeddingStore, SimilarityMetric, measure
from .lexical import Bm25Index, Bm25Params, bm25_score

_MODES = ("sem", "lex", "comb")


@dataclass
class FusionConfig:
    """Every retrieval hyperparameter in one place.

    alpha weights the semantic side in combined mode and is ignored by the
    pure modes; 0.83 and k=1 are the tuned defaults used downstream.
    """

    mode: str = "comb"
    alpha: float = 0.83
    k: int = 1
    bm25: Bm25Params = field(default_factory=Bm25Params)
    metric: SimilarityMetric = SimilarityMetric.COSINE

    def __post_init__(self) -> None:
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class ScoreStats:
    mu: float
    sigma: float


@dataclass(frozen=True)
class NormalizationStats:
    """Per-family mean/stddev used by combined-mode normalization."""

    sem: ScoreStats
    lex: ScoreStats

    @property
    def mu_sem(self) -> float:
        return self.sem.mu

    @property
    def sigma_sem(self) -> float:
        return self.sem.sigma

    @property
    def mu_lex(self) -> float:
        return self.lex.mu

    @property
    def sigma_lex(self) -> float:
        return self.lex.sigma


@dataclass
class FewShotContext:
    """The label-balanced shot set retrieved for one query premise."""

    query_id: str
    shots: list[tuple[ExamplePair, float]]
    per_label_counts: dict[NliLabel, int]

    def shot_ids(self) -> list[str]:
        return [ex.id for ex, _ in self.shots]


@dataclass
class AlphaSweepResult:
    grid: list[tuple[float, float]]
    best_alpha: float
    best_auc: float


def zscore(scores: list[float]) -> tuple[list[float], ScoreStats]:
    """Population z-scores; a zero-spread family normalizes to all zeros."""
    if len(scores) == 0:
        raise ValueError("cannot z-normalize an empty score list")
    arr = np.asarray(scores, dtype=np.float64)
    mu = float(arr.mean())
    sigma = float(arr.std())
    if sigma == 0.0:
        return [0.0] * len(scores), ScoreStats(mu, 0.0)
    return ((arr - mu) / sigma).tolist(), ScoreStats(mu, sigma)


def combined_score(alpha: float, s_sem_norm: float, s_lex_norm: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return alpha * s_sem_norm + (1.0 - alpha) * s_lex_norm


def _oriented(metric: SimilarityMetric, value: float) -> float:
    """Score where larger always means more similar."""
    return value if metric.higher_is_better else -value


def _semantic_scores(query_vec, store: EmbeddingStore, ids: list[str],
                     metric: SimilarityMetric) -> dict[str, float]:
    return {cid: measure(metric, query_vec, store.get(cid)) for cid in ids}


def _lexical_scores(index: Bm25Index, query_text: str, ids: list[str]) -> dict[str, float]:
    return {cid: bm25_score(index, query_text, cid) for cid in ids}


def _top_k(scores: dict[str, float], ids: list[str], k: int) -> list[tuple[str, float]]:
    ranked = sorted(ids, key=lambda cid: (-scores[cid], cid))
    return [(cid, scores[cid]) for cid in ranked[:k]]


def fused_pool_scores(query: ExamplePair, pool: list[str], index: Bm25Index,
                      store: EmbeddingStore, cfg: FusionConfig
                      ) -> tuple[dict[str, float], NormalizationStats]:
    """Combined-mode scores for one query over its full candidate pool."""
    sem_raw = _semantic_scores(store.get(query.id), store, pool, cfg.metric)
    lex_raw = _lexical_scores(index, query.premise, pool)
    sem_norm, sem_stats = zscore([_oriented(cfg.metric, sem_raw[c]) for c in pool])
    lex_norm, lex_stats = zscore([lex_raw[c] for c in pool])
    fused = {
        cid: combined_score(cfg.alpha, s, l)
        for cid, s, l in zip(pool, sem_norm, lex_norm)
    }
    return fused, NormalizationStats(sem_stats, lex_stats)


def rank_candidates(query: ExamplePair, pool: list[str], index: Bm25Index,
                    store: EmbeddingStore, cfg: FusionConfig) -> list[tuple[str, float]]:
    """Full (score desc, id asc) ranking of a candidate pool under one mode.

    Shot scores are the mode's native values: raw metric value for sem,
    BM25 for lex, interpolated z-scores for comb.  Ordering for distance
    metrics uses the flipped orientation.
    """
    if cfg.mode == "sem":
        raw = _semantic_scores(store.get(query.id), store, pool, cfg.metric)
        ranked = sorted(pool, key=lambda c: (-_oriented(cfg.metric, raw[c]), c))
        return [(cid, raw[cid]) for cid in ranked]
    if cfg.mode == "lex":
        raw = _lexical_scores(index, query.premise, pool)
        return [(cid, raw[cid]) for cid in sorted(pool, key=lambda c: (-raw[c], c))]
    fused, _ = fused_pool_scores(query, pool, index, store, cfg)
    return [(cid, fused[cid]) for cid in sorted(pool, key=lambda c: (-fused[c], c))]


def retrieve_context(query: ExamplePair, corpus: LabeledCorpus, index: Bm25Index,
                     store: EmbeddingStore, cfg: FusionConfig) -> FewShotContext:
    """Retrieve the balanced 3k-shot context for one query premise.

    The query example is excluded from every label slice; combined-mode
    normalization statistics are computed over the union of all three
    eligible slices, not per label.
    """
    eligible: dict[NliLabel, list[str]] = {}
    for label in LABELS:
        ids = [i for i in corpus.partitions.get(label, []) if i != query.id]
        if len(ids) < cfg.k:
            raise ValueError(
                f"label {label.value!r} has {len(ids)} eligible candidates, need k={cfg.k}"
            )
        eligible[label] = ids

    if cfg.mode == "sem":
        raw = _semantic_scores(store.get(query.id), store,
                               [c for ids in eligible.values() for c in ids], cfg.metric)
        oriented = {c: _oriented(cfg.metric, v) for c, v in raw.items()}
        per_label = {
            label: [(cid, raw[cid]) for cid, _ in _top_k(oriented, ids, cfg.k)]
            for label, ids in eligible.items()
        }
    elif cfg.mode == "lex":
        per_label = {}
        for label, ids in eligible.items():
            raw = _lexical_scores(index, query.premise, ids)
            per_label[label] = _top_k(raw, ids, cfg.k)
    else:
        pool = [c for ids in eligible.values() for c in ids]
        fused, _ = fused_pool_scores(query, pool, index, store, cfg)
        per_label = {label: _top_k(fused, ids, cfg.k) for label, ids in eligible.items()}

    shots = [
        (corpus.get(cid), score)
        for label in LABELS
        for cid, score in per_label[label]
    ]
    return FewShotContext(
        query_id=query.id,
        shots=shots,
        per_label_counts={label: len(per_label[label]) for label in LABELS},
    )


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the average of their rank block."""
    _, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    upper = np.cumsum(counts)
    lower = upper - counts + 1
    return ((lower + upper) / 2.0)[inverse]


def roc_auc(scores: list[float], relevant: list[bool]) -> float:
    """Rank-statistic ROC AUC with mid-ranks for ties.

    Equivalent to the pairwise definition: over all (positive, negative)
    pairs, count 1 for a correctly ordered pair and 0.5 for a tie, divided
    by n_pos * n_neg.
    """
    if len(scores) != len(relevant):
        raise ValueError("scores and relevance labels must align")
    s = np.asarray(scores, dtype=np.float64)
    rel = np.asarray(relevant, dtype=bool)
    n_pos = int(rel.sum())
    n_neg = int(len(rel) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC AUC needs at least one relevant and one non-relevant item")
    ranks = _midranks(s)
    rank_sum = float(ranks[rel].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def tune_alpha(eval_corpus: LabeledCorpus, index: Bm25Index, store: EmbeddingStore,
               grid_step: float = 0.01,
               metric: SimilarityMetric = SimilarityMetric.COSINE) -> AlphaSweepResult:
    """Grid-search the interpolation weight by pooled same-label ROC AUC.

    Every example serves as a query; every other example is a candidate
    whose relevance is label agreement with the query.  Normalized score
    pairs are pooled across queries, then each grid alpha is scored with
    one AUC over the pooled pairs.  Grid ties resolve toward the smaller
    alpha.
    """
    if grid_step <= 0 or grid_step > 1:
        raise ValueError(f"grid_step must be in (0, 1], got {grid_step}")
    steps = round(1.0 / grid_step)
    if abs(steps * grid_step - 1.0) > 1e-9:
        raise ValueError(f"grid_step {grid_step} does not divide 1 evenly")
    if len([lab for lab in LABELS if corpus_has(eval_corpus, lab)]) < 2:
        raise ValueError("alpha tuning needs at least two labels represented")

    sem_all: list[float] = []
    lex_all: list[float] = []
    rel_all: list[bool] = []
    ids = [ex.id for ex in eval_corpus]
    for query in eval_corpus:
        pool = [i for i in ids if i != query.id]
        sem_raw = _semantic_scores(store.get(query.id), store, pool, metric)
        lex_raw = _lexical_scores(index, query.premise, pool)
        sem_norm, _ = zscore([_oriented(metric, sem_raw[c]) for c in pool])
        lex_norm, _ = zscore([lex_raw[c] for c in pool])
        sem_all.extend(sem_norm)
        lex_all.extend(lex_norm)
        rel_all.extend(eval_corpus.get(c).label == query.label for c in pool)

    sem_arr = np.asarray(sem_all)
    lex_arr = np.asarray(lex_all)
    grid: list[tuple[float, float]] = []
    best_alpha, best_auc = 0.0, -1.0
    for i in range(steps + 1):
        alpha = i / steps
        auc = roc_auc((alpha * sem_arr + (1.0 - alpha) * lex_arr).tolist(), rel_all)
        grid.append((alpha, auc))
        if auc > best_auc:
            best_alpha, best_auc = alpha, auc
    return AlphaSweepResult(grid=grid, best_alpha=best_alpha, best_auc=best_auc)


def corpus_has(corpus: LabeledCorpus, label: NliLabel) -> bool:
    return bool(corpus.partitions.get(label))


def save_sweep(result: AlphaSweepResult, path: str | Path) -> Path:
    """Sweep report: one {"alpha", "auc"} line per grid point plus a summary."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for alpha, auc in result.grid:
            fh.write(json.dumps({"alpha": alpha, "auc": auc}) + "\n")
        fh.write(json.dumps({"best_alpha": result.best_alpha,
                             "best_auc": result.best_auc}) + "\n")
    return path
