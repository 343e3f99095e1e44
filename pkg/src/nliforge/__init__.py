"""Adversarial NLI data curation: hybrid few-shot retrieval, LLM-generated
hypotheses filtered against a target model, unanimous judge validation, and
ratio-mixed training-set assembly.
"""

from .corpus import (
    CorpusError,
    ExamplePair,
    LabeledCorpus,
    LABELS,
    NliLabel,
    load_jsonl,
    parse_label,
    save_jsonl,
)
from .curation import (
    AdversarialCandidate,
    EnsembleConfig,
    Stage,
    adversarial_filter,
    build_generation_prompt,
    generate_hypothesis,
    validate_unanimous,
)
from .embeddings import EmbeddingStore, SimilarityMetric, embed_corpus, measure
from .fusion import (
    AlphaSweepResult,
    FewShotContext,
    FusionConfig,
    retrieve_context,
    roc_auc,
    tune_alpha,
)
from .gateway import ChatMessage, JudgeVerdict, chat_complete, classify_nli, judge_label
from .lexical import Bm25Index, Bm25Params, bm25_score, build_index, tokenize
from .mixer import MixingRatio, MixResult, SplitMix64, emit_training_file, mix
from .pipeline import ConfigError, PipelineConfig, StageError, run_pipeline
from .wire import ModelEndpoint, TransportError

__version__ = "0.1.0"

__all__ = [
    "AdversarialCandidate",
    "AlphaSweepResult",
    "Bm25Index",
    "Bm25Params",
    "ChatMessage",
    "ConfigError",
    "CorpusError",
    "EmbeddingStore",
    "EnsembleConfig",
    "ExamplePair",
    "FewShotContext",
    "FusionConfig",
    "JudgeVerdict",
    "LABELS",
    "LabeledCorpus",
    "MixResult",
    "MixingRatio",
    "ModelEndpoint",
    "NliLabel",
    "PipelineConfig",
    "SimilarityMetric",
    "SplitMix64",
    "Stage",
    "StageError",
    "TransportError",
    "adversarial_filter",
    "bm25_score",
    "build_generation_prompt",
    "build_index",
    "chat_complete",
    "classify_nli",
    "embed_corpus",
    "emit_training_file",
    "generate_hypothesis",
    "judge_label",
    "load_jsonl",
    "measure",
    "mix",
    "parse_label",
    "retrieve_context",
    "roc_auc",
    "run_pipeline",
    "save_jsonl",
    "tokenize",
    "tune_alpha",
    "validate_unanimous",
]
