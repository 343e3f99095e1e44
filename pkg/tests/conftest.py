"""Shared corpus and embedding builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from nliforge.corpus import LABELS, ExamplePair, LabeledCorpus
from nliforge.embeddings import EmbeddingStore

WORDS = (
    "river market train garden violin harbor lantern meadow circus bakery "
    "anchor bridge castle dragon engine forest guitar hammer island jacket "
    "kettle ladder mirror needle ocean palace quarry ribbon saddle temple"
).split()


def make_corpus(n: int, seed: int = 0, with_hypothesis: bool = True) -> LabeledCorpus:
    """A deterministic n-example corpus with labels cycling E, N, C."""
    rng = np.random.default_rng(seed)
    examples = []
    for i in range(n):
        picks = rng.choice(len(WORDS), size=5, replace=True)
        premise = " ".join(WORDS[j] for j in picks) + f" item{i}"
        hypothesis = None
        if with_hypothesis:
            hypothesis = f"Someone saw the {WORDS[picks[0]]}."
        examples.append(ExamplePair(
            id=f"ex-{i:04d}",
            premise=premise,
            hypothesis=hypothesis,
            label=LABELS[i % 3],
            source="unit",
        ))
    return LabeledCorpus.from_examples(examples)


def random_store(corpus: LabeledCorpus, dim: int = 8, seed: int = 0) -> EmbeddingStore:
    """Random unit-ish embeddings for every example id."""
    rng = np.random.default_rng(seed)
    store = EmbeddingStore()
    for ex in corpus:
        store.add(ex.id, rng.normal(size=dim))
    return store


@pytest.fixture
def small_corpus() -> LabeledCorpus:
    return make_corpus(12, seed=3)


# One PASS/FAIL/SKIP line per acceptance criterion, printed after the normal
# pytest summary so a release run shows the whole contract at a glance.
_acceptance_results: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    label = name.removeprefix("test_").replace("_", " ")
    if report.when == "call":
        _acceptance_results.append((label, "PASS" if report.passed else "FAIL"))
    elif report.when == "setup" and report.skipped:
        _acceptance_results.append((label, "SKIP"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome in _acceptance_results:
        terminalreporter.write_line(f"{outcome}  {label}")
    _acceptance_results.clear()
