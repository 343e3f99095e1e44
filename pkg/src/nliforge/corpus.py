"""Labeled NLI corpora: records, label partitions, JSONL ingestion.

The JSONL record schema used everywhere in this project is
``{"id", "premise", "hypothesis", "label", "source"}`` with exactly one
record per line.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable


class CorpusError(ValueError):
    """Raised for malformed corpus files or records."""


class NliLabel(str, enum.Enum):
    ENTAILMENT = "entailment"
    NEUTRAL = "neutral"
    CONTRADICTION = "contradiction"

    def __str__(self) -> str:  # pragma: no cover - repr convenience
        return self.value


# Accepted spellings, folded to lowercase before lookup.  Both the short and
# long forms circulate in the NLI literature, so both are accepted on input;
# records are always stored canonically.
_LABEL_ALIASES = {
    "entail": NliLabel.ENTAILMENT,
    "entailment": NliLabel.ENTAILMENT,
    "neutral": NliLabel.NEUTRAL,
    "contradict": NliLabel.CONTRADICTION,
    "contradiction": NliLabel.CONTRADICTION,
}

LABELS: tuple[NliLabel, ...] = (
    NliLabel.ENTAILMENT,
    NliLabel.NEUTRAL,
    NliLabel.CONTRADICTION,
)


def parse_label(value: str) -> NliLabel:
    """Parse a label string, accepting case-insensitive aliases."""
    if not isinstance(value, str):
        raise CorpusError(f"unknown label {value!r}")
    label = _LABEL_ALIASES.get(value.strip().lower())
    if label is None:
        raise CorpusError(f"unknown label {value!r}")
    return label


@dataclass
class ExamplePair:
    """One premise/hypothesis/label record.

    ``hypothesis`` may be None for premise-only retrieval candidates; records
    destined for training or validation must carry a non-empty hypothesis.
    """

    id: str
    premise: str
    hypothesis: str | None
    label: NliLabel
    source: str = ""

    def __post_init__(self) -> None:
        if not self.id:
            raise CorpusError("example id must be non-empty")
        if not self.premise:
            raise CorpusError(f"example '{self.id}' has an empty premise")

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "premise": self.premise,
            "hypothesis": self.hypothesis,
            "label": self.label.value,
            "source": self.source,
        }

    @classmethod
    def from_record(cls, rec: dict, *, default_source: str = "", line: int | None = None) -> "ExamplePair":
        where = f" at line {line}" if line is not None else ""
        if "premise" not in rec:
            raise CorpusError(f"missing 'premise'{where}")
        if "label" not in rec:
            raise CorpusError(f"missing 'label'{where}")
        try:
            label = parse_label(rec["label"])
        except CorpusError:
            raise CorpusError(f"unknown label {rec['label']!r}{where}") from None
        source = rec.get("source") or default_source
        example_id = rec.get("id")
        if not example_id:
            if line is None:
                raise CorpusError("record without id requires a line number")
            example_id = f"{source}-{line}"
        hypothesis = rec.get("hypothesis")
        if hypothesis is not None and not isinstance(hypothesis, str):
            raise CorpusError(f"hypothesis must be a string or null{where}")
        return cls(
            id=str(example_id),
            premise=rec["premise"],
            hypothesis=hypothesis,
            label=label,
            source=source,
        )


@dataclass
class LabeledCorpus:
    """An ordered, label-partitioned collection of examples.

    Iteration order is insertion order and every id lives in exactly one
    partition, so downstream retrieval and sampling are deterministic.
    """

    examples: list[ExamplePair] = field(default_factory=list)
    partitions: dict[NliLabel, list[str]] = field(default_factory=dict)
    by_id: dict[str, ExamplePair] = field(default_factory=dict)

    @classmethod
    def from_examples(cls, examples: list[ExamplePair]) -> "LabeledCorpus":
        corpus = cls()
        for ex in examples:
            corpus.add(ex)
        return corpus

    def add(self, ex: ExamplePair) -> None:
        if ex.id in self.by_id:
            raise CorpusError(f"duplicate id {ex.id!r}")
        self.examples.append(ex)
        self.by_id[ex.id] = ex
        self.partitions.setdefault(ex.label, []).append(ex.id)

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    def get(self, example_id: str) -> ExamplePair:
        try:
            return self.by_id[example_id]
        except KeyError:
            raise KeyError(f"no example with id {example_id!r}") from None


def load_jsonl(path: str | Path, source: str | None = None) -> LabeledCorpus:
    """Load a corpus from a JSONL file.

    ``source`` defaults to the file stem and is applied to records that do
    not carry their own source tag.  Records without an id are assigned
    ``{source}-{line_number}``.
    """
    path = Path(path)
    default_source = source if source is not None else path.stem
    corpus = LabeledCorpus()
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as err:
                raise CorpusError(f"malformed JSON at line {line_no}: {err.msg}") from None
            if not isinstance(rec, dict):
                raise CorpusError(f"expected a JSON object at line {line_no}")
            ex = ExamplePair.from_record(rec, default_source=default_source, line=line_no)
            try:
                corpus.add(ex)
            except CorpusError as err:
                raise CorpusError(f"{err} at line {line_no}") from None
    return corpus


def save_jsonl(examples: Iterable[ExamplePair], path: str | Path) -> Path:
    """Write examples in the canonical JSONL schema (round-trips exactly).

    Accepts a LabeledCorpus or any iterable of ExamplePair.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_record(), ensure_ascii=False) + "\n")
    return path


def partition(corpus: LabeledCorpus, label: NliLabel) -> list[ExamplePair]:
    """All examples with the given label, in stable corpus order."""
    return [corpus.by_id[i] for i in corpus.partitions.get(label, [])]
