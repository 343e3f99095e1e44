"""Candidate lifecycle: generate a hypothesis, filter on the target model,
validate with a unanimous judge ensemble.

Every candidate moves monotonically through
generated -> (kept_by_filter | dropped_by_filter) -> (validated | rejected).
Classifier and judge transport failures fail closed: the candidate drops or
the verdict counts as an abstention, never a silent pass.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

from .corpus import ExamplePair, NliLabel, parse_label
from .fusion import FewShotContext
from .gateway import ChatMessage, JudgeVerdict, chat_complete, classify_nli, judge_label
from .wire import ModelEndpoint, Transport, TransportError

log = logging.getLogger(__name__)

_INSTRUCTION_PHRASES = {
    NliLabel.ENTAILMENT: "entails",
    NliLabel.NEUTRAL: "is neutral with",
    NliLabel.CONTRADICTION: "contradicts",
}


class Stage(str, enum.Enum):
    GENERATED = "generated"
    KEPT_BY_FILTER = "kept_by_filter"
    DROPPED_BY_FILTER = "dropped_by_filter"
    VALIDATED = "validated"
    REJECTED = "rejected"


@dataclass
class AdversarialCandidate:
    """One (premise, hypothesis, target label) triple and its lifecycle."""

    id: str
    round: int
    premise: str
    target_label: NliLabel
    context_ids: list[str] = field(default_factory=list)
    hypothesis: str = ""
    target_prediction: NliLabel | None = None
    verdicts: list[JudgeVerdict] = field(default_factory=list)
    stage: Stage = Stage.GENERATED

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "round": self.round,
            "premise": self.premise,
            "target_label": self.target_label.value,
            "context_ids": list(self.context_ids),
            "hypothesis": self.hypothesis,
            "target_prediction": (
                self.target_prediction.value if self.target_prediction else None
            ),
            "verdicts": [v.to_record() for v in self.verdicts],
            "stage": self.stage.value,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "AdversarialCandidate":
        return cls(
            id=rec["id"],
            round=rec["round"],
            premise=rec["premise"],
            target_label=parse_label(rec["target_label"]),
            context_ids=list(rec.get("context_ids", [])),
            hypothesis=rec.get("hypothesis", ""),
            target_prediction=(
                parse_label(rec["target_prediction"]) if rec.get("target_prediction") else None
            ),
            verdicts=[JudgeVerdict.from_record(v) for v in rec.get("verdicts", [])],
            stage=Stage(rec["stage"]),
        )

    def to_example(self, source: str) -> ExamplePair:
        return ExamplePair(id=self.id, premise=self.premise,
                           hypothesis=self.hypothesis, label=self.target_label,
                           source=source)


@dataclass
class EnsembleConfig:
    """The judge set; retention requires full unanimity over every judge."""

    judges: list[ModelEndpoint]

    def __post_init__(self) -> None:
        if not self.judges:
            raise ValueError("ensemble needs at least one judge")


def build_generation_prompt(query: ExamplePair, context: FewShotContext,
                            target_label: NliLabel) -> list[ChatMessage]:
    """Render the few-shot generation prompt as a single user message.

    Shots appear in label order entailment, neutral, contradiction, each as
    a Premise/Label/Hypothesis block, followed by the query premise and the
    instruction for the target relation.
    """
    counts = set(context.per_label_counts.values())
    if len(context.per_label_counts) != 3 or len(counts) != 1:
        raise ValueError(
            f"context for {context.query_id!r} is unbalanced: "
            f"{ {k.value: v for k, v in context.per_label_counts.items()} }"
        )
    blocks = []
    for shot, _ in context.shots:
        if shot.hypothesis is None:
            raise ValueError(f"shot {shot.id!r} has no hypothesis to render")
        blocks.append(
            f"Premise: {shot.premise}\nLabel: {shot.label.value}.\nHypothesis: {shot.hypothesis}"
        )
    phrase = _INSTRUCTION_PHRASES[target_label]
    parts = blocks + [
        f"Premise: {query.premise}",
        f"Now generate a one-sentence hypothesis that {phrase} the premise above. "
        "Return only the hypothesis without narration.",
    ]
    return [ChatMessage("user", "\n\n".join(parts))]


def generate_hypothesis(generator: ModelEndpoint, prompt: list[ChatMessage],
                        transport: Transport | None = None) -> str:
    """One generation call, normalized to a single bare sentence.

    Surrounding quotes are stripped and multi-line replies reduce to the
    first non-empty line, enforcing the no-narration contract client-side.
    """
    if not prompt:
        raise ValueError("prompt must be non-empty")
    reply = chat_complete(generator, prompt, transport)
    for line in reply.splitlines():
        text = line.strip()
        if not text:
            continue
        for quote in ('"', "'"):
            if len(text) >= 2 and text.startswith(quote) and text.endswith(quote):
                text = text[1:-1].strip()
        if text:
            return text
    raise ValueError("generator returned an empty hypothesis")


def adversarial_filter(target: ModelEndpoint, cand: AdversarialCandidate,
                       transport: Transport | None = None) -> AdversarialCandidate:
    """Keep the candidate only if the target model misclassifies it.

    Classifier failures drop the candidate (fail closed) with the reason
    logged; nothing passes unvetted.
    """
    if cand.stage != Stage.GENERATED:
        raise ValueError(f"candidate {cand.id!r} is in stage {cand.stage.value}, not generated")
    try:
        prediction = classify_nli(target, cand.premise, cand.hypothesis, transport)
    except (TransportError, ValueError) as err:
        log.warning("dropping candidate %s: classifier failed: %s", cand.id, err)
        cand.stage = Stage.DROPPED_BY_FILTER
        return cand
    cand.target_prediction = prediction
    cand.stage = (
        Stage.KEPT_BY_FILTER if prediction != cand.target_label else Stage.DROPPED_BY_FILTER
    )
    return cand


def unanimous(verdicts: list[JudgeVerdict], target: NliLabel) -> bool:
    """True iff every verdict is the target label; abstentions break unanimity."""
    return all(v.predicted == target for v in verdicts)


def validate_unanimous(ensemble: EnsembleConfig, cand: AdversarialCandidate,
                       transports: list[Transport | None] | None = None
                       ) -> AdversarialCandidate:
    """Query every judge and retain the candidate only on full agreement.

    All judges are always queried (no short-circuit on the first
    disagreement) so the stored verdict table supports ensemble-size
    re-analysis.  A judge whose transport fails contributes an abstention.
    """
    if cand.stage != Stage.KEPT_BY_FILTER:
        raise ValueError(
            f"candidate {cand.id!r} is in stage {cand.stage.value}, not kept_by_filter"
        )
    if transports is None:
        transports = [None] * len(ensemble.judges)
    verdicts: list[JudgeVerdict] = []
    for judge, transport in zip(ensemble.judges, transports):
        try:
            verdicts.append(judge_label(judge, cand.premise, cand.hypothesis, transport))
        except TransportError as err:
            log.warning("judge %s failed for candidate %s: %s",
                        judge.model_id or judge.base_url, cand.id, err)
            verdicts.append(JudgeVerdict(
                judge_id=judge.model_id or judge.base_url,
                predicted=None,
                raw_text=f"<transport error: {err}>",
            ))
    cand.verdicts = verdicts
    cand.stage = Stage.VALIDATED if unanimous(verdicts, cand.target_label) else Stage.REJECTED
    return cand
