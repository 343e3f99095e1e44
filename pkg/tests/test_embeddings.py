from __future__ import annotations

import math

import numpy as np
import pytest

from nliforge.embeddings import (
    EmbeddingStore,
    SimilarityMetric,
    as_vector,
    embed_corpus,
    fetch_embeddings,
    load_store,
    load_store_jsonl,
    load_store_vemb,
    measure,
    save_store_jsonl,
    save_store_vemb,
    top_k_semantic,
)
from nliforge.wire import CallableTransport, ModelEndpoint

from .conftest import make_corpus, random_store

ALL_METRICS = list(SimilarityMetric)


def oracle_measure(metric: SimilarityMetric, a, b) -> float:
    """Componentwise reimplementation with plain Python loops."""
    if metric is SimilarityMetric.COSINE:
        dot = sum(x * y for x, y in zip(a, b))
        na = math.sqrt(sum(x * x for x in a))
        nb = math.sqrt(sum(y * y for y in b))
        return 0.0 if na == 0.0 or nb == 0.0 else dot / (na * nb)
    if metric is SimilarityMetric.DOT:
        return sum(x * y for x, y in zip(a, b))
    if metric is SimilarityMetric.L2:
        return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))
    if metric is SimilarityMetric.L1:
        return sum(abs(x - y) for x, y in zip(a, b))
    if metric is SimilarityMetric.BRAY_CURTIS:
        num = sum(abs(x - y) for x, y in zip(a, b))
        den = sum(abs(x + y) for x, y in zip(a, b))
        return 0.0 if den == 0.0 else num / den
    if metric is SimilarityMetric.CANBERRA:
        total = 0.0
        for x, y in zip(a, b):
            den = abs(x) + abs(y)
            if den > 0.0:
                total += abs(x - y) / den
        return total
    raise AssertionError(metric)


class TestMeasureOracle:
    @pytest.mark.parametrize("metric", ALL_METRICS)
    def test_random_pairs(self, metric):
        rng = np.random.default_rng(11)
        for _ in range(100):
            dim = int(rng.integers(2, 12))
            a = rng.normal(size=dim)
            b = rng.normal(size=dim)
            assert measure(metric, a, b) == pytest.approx(
                oracle_measure(metric, a, b), abs=1e-9)

    @pytest.mark.parametrize("metric", ALL_METRICS)
    def test_symmetry(self, metric):
        rng = np.random.default_rng(12)
        for _ in range(20):
            a = rng.normal(size=6)
            b = rng.normal(size=6)
            assert measure(metric, a, b) == pytest.approx(
                measure(metric, b, a), abs=1e-12)

    def test_identity_values(self):
        rng = np.random.default_rng(13)
        a = rng.normal(size=9)
        assert measure(SimilarityMetric.COSINE, a, a) == pytest.approx(1.0, abs=1e-12)
        for metric in (SimilarityMetric.L2, SimilarityMetric.L1,
                       SimilarityMetric.BRAY_CURTIS, SimilarityMetric.CANBERRA):
            assert measure(metric, a, a) == pytest.approx(0.0, abs=1e-12)

    def test_cosine_scale_invariance(self):
        rng = np.random.default_rng(14)
        a = rng.normal(size=7)
        b = rng.normal(size=7)
        base = measure(SimilarityMetric.COSINE, a, b)
        for scale in (0.01, 3.0, 250.0):
            assert measure(SimilarityMetric.COSINE, scale * a, b) == pytest.approx(
                base, abs=1e-9)

    def test_dot_linearity(self):
        rng = np.random.default_rng(15)
        a = rng.normal(size=7)
        b = rng.normal(size=7)
        c = rng.normal(size=7)
        lhs = measure(SimilarityMetric.DOT, a, 2.0 * b + c)
        rhs = 2.0 * measure(SimilarityMetric.DOT, a, b) + measure(SimilarityMetric.DOT, a, c)
        assert lhs == pytest.approx(rhs, abs=1e-9)


class TestMeasureConventions:
    def test_cosine_zero_norm(self):
        assert measure(SimilarityMetric.COSINE, np.zeros(4), np.ones(4)) == 0.0

    def test_bray_curtis_zero_denominator(self):
        a = np.array([1.0, -1.0])
        b = np.array([-1.0, 1.0])
        assert measure(SimilarityMetric.BRAY_CURTIS, a, b) == 0.0

    def test_canberra_zero_component_pair(self):
        a = np.array([0.0, 1.0])
        b = np.array([0.0, 3.0])
        assert measure(SimilarityMetric.CANBERRA, a, b) == pytest.approx(0.5, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch: 3 vs 4"):
            measure(SimilarityMetric.COSINE, np.zeros(3), np.zeros(4))

    def test_orientation_flags(self):
        assert SimilarityMetric.COSINE.higher_is_better
        assert SimilarityMetric.DOT.higher_is_better
        for metric in (SimilarityMetric.L2, SimilarityMetric.L1,
                       SimilarityMetric.BRAY_CURTIS, SimilarityMetric.CANBERRA):
            assert not metric.higher_is_better


class TestAsVector:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            as_vector([1.0, float("nan")])

    def test_rejects_empty_and_2d(self):
        with pytest.raises(ValueError):
            as_vector([])
        with pytest.raises(ValueError):
            as_vector([[1.0, 2.0]])

    def test_float64_output(self):
        vec = as_vector([1, 2, 3])
        assert vec.dtype == np.float64


class TestStore:
    def test_dim_fixed_by_first_add(self):
        store = EmbeddingStore()
        store.add("a", [1.0, 2.0])
        assert store.dim == 2
        with pytest.raises(ValueError, match="has dim 3, store has dim 2"):
            store.add("b", [1.0, 2.0, 3.0])

    def test_duplicate_id_rejected(self):
        store = EmbeddingStore()
        store.add("a", [1.0])
        with pytest.raises(ValueError, match="duplicate"):
            store.add("a", [2.0])

    def test_get_missing(self):
        with pytest.raises(KeyError, match="no embedding for id 'x'"):
            EmbeddingStore().get("x")

    def test_contains_and_len(self):
        store = EmbeddingStore()
        store.add("a", [0.5, 0.5])
        assert "a" in store and "b" not in store
        assert len(store) == 1


class TestTopKSemantic:
    def test_cosine_ranking_with_id_ties(self):
        store = EmbeddingStore()
        store.add("q", [1.0, 0.0])
        store.add("b", [1.0, 0.0])
        store.add("a", [1.0, 0.0])
        store.add("c", [0.0, 1.0])
        ranked = top_k_semantic(store, store.get("q"), ["a", "b", "c"], 3)
        assert [cid for cid, _ in ranked] == ["a", "b", "c"]

    def test_distance_metric_prefers_smaller(self):
        store = EmbeddingStore()
        store.add("near", [1.0, 1.0])
        store.add("far", [9.0, 9.0])
        ranked = top_k_semantic(store, np.array([0.0, 0.0]), ["far", "near"], 2,
                                SimilarityMetric.L2)
        assert [cid for cid, _ in ranked] == ["near", "far"]


class TestPersistence:
    def test_jsonl_round_trip_exact(self, tmp_path):
        store = random_store(make_corpus(6), dim=5, seed=21)
        path = tmp_path / "store.jsonl"
        save_store_jsonl(store, path)
        loaded = load_store_jsonl(path)
        for ex_id, vec in store.vectors.items():
            np.testing.assert_array_equal(loaded.get(ex_id), vec)

    def test_binary_round_trip_float32(self, tmp_path):
        store = random_store(make_corpus(6), dim=5, seed=22)
        path = tmp_path / "store.vemb"
        save_store_vemb(store, path)
        loaded = load_store_vemb(path)
        assert len(loaded) == len(store)
        for ex_id, vec in store.vectors.items():
            # vectors are stored as float32, so equality only to that precision
            np.testing.assert_allclose(loaded.get(ex_id), vec, atol=1e-6)

    def test_load_store_sniffs_format(self, tmp_path):
        store = random_store(make_corpus(4), dim=3, seed=23)
        jsonl = tmp_path / "s.jsonl"
        binary = tmp_path / "s.vemb"
        save_store_jsonl(store, jsonl)
        save_store_vemb(store, binary)
        assert len(load_store(jsonl)) == 4
        assert len(load_store(binary)) == 4


def embedding_service(dim: int = 4):
    """A transport-level fake returning index-tagged constant vectors."""

    def respond(url: str, payload: dict) -> dict:
        data = [
            {"index": i, "embedding": [float(len(text))] * dim}
            for i, text in enumerate(payload["input"])
        ]
        return {"data": list(reversed(data))}  # order must not matter

    return CallableTransport(respond)


class TestProviderClient:
    def test_order_restored_by_index(self):
        endpoint = ModelEndpoint(base_url="http://embed.test", model_id="m")
        vectors = fetch_embeddings(endpoint, ["ab", "wxyz"], embedding_service())
        assert vectors[0][0] == 2.0
        assert vectors[1][0] == 4.0

    def test_empty_batch_rejected(self):
        endpoint = ModelEndpoint(base_url="http://embed.test")
        with pytest.raises(ValueError, match="non-empty"):
            fetch_embeddings(endpoint, [], embedding_service())

    def test_count_mismatch_detected(self):
        endpoint = ModelEndpoint(base_url="http://embed.test")
        short = CallableTransport(lambda url, payload: {"data": []})
        with pytest.raises(ValueError, match="count mismatch: sent 2 texts, got 0"):
            fetch_embeddings(endpoint, ["a", "b"], short)

    def test_embed_corpus_reuses_cache(self, tmp_path):
        corpus = make_corpus(10, seed=30)
        endpoint = ModelEndpoint(base_url="http://embed.test", model_id="m")
        transport = embedding_service()
        store_path = tmp_path / "store.jsonl"
        embed_corpus(endpoint, corpus, store_path=store_path, batch_size=4,
                     transport=transport)
        calls_after_first = transport.calls
        assert calls_after_first == 3  # ceil(10 / 4)
        embed_corpus(endpoint, corpus, store_path=store_path, batch_size=4,
                     transport=transport)
        assert transport.calls == calls_after_first

    def test_embed_corpus_store_order_matches_corpus(self, tmp_path):
        corpus = make_corpus(5, seed=31)
        endpoint = ModelEndpoint(base_url="http://embed.test")
        store_path = tmp_path / "store.jsonl"
        store = embed_corpus(endpoint, corpus, store_path=store_path,
                             transport=embedding_service())
        assert list(store.vectors) == [ex.id for ex in corpus]
