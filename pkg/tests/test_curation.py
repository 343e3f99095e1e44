"""Candidate lifecycle: generation prompt, target-model filter, judge ensemble."""

from __future__ import annotations

import itertools

import pytest

from nliforge.corpus import ExamplePair, NliLabel
from nliforge.curation import (
    AdversarialCandidate,
    EnsembleConfig,
    Stage,
    adversarial_filter,
    build_generation_prompt,
    generate_hypothesis,
    unanimous,
    validate_unanimous,
)
from nliforge.fusion import FewShotContext
from nliforge.gateway import JudgeVerdict
from nliforge.wire import CallableTransport, ModelEndpoint, TransportError


def chat_transport(reply: str) -> CallableTransport:
    return CallableTransport(
        lambda url, payload: {"choices": [{"message": {"content": reply}}]}
    )


def classify_transport(label: str) -> CallableTransport:
    return CallableTransport(
        lambda url, payload: {"label": label, "scores": {label: 1.0}}
    )


def broken_transport() -> CallableTransport:
    def fail(url, payload):
        raise TransportError("connection refused", retryable=True)

    return CallableTransport(fail)


def shot(id: str, label: NliLabel) -> ExamplePair:
    return ExamplePair(id=id, premise=f"premise {id}",
                       hypothesis=f"hypothesis {id}", label=label, source="unit")


def balanced_context(query_id: str = "q-1") -> FewShotContext:
    shots = [
        (shot("e-1", NliLabel.ENTAILMENT), 0.9),
        (shot("n-1", NliLabel.NEUTRAL), 0.8),
        (shot("c-1", NliLabel.CONTRADICTION), 0.7),
    ]
    return FewShotContext(query_id=query_id, shots=shots,
                          per_label_counts={lab: 1 for lab in NliLabel})


def candidate(stage: Stage = Stage.GENERATED,
              target: NliLabel = NliLabel.ENTAILMENT) -> AdversarialCandidate:
    return AdversarialCandidate(
        id="r0-00001", round=0, premise="A dog runs.", target_label=target,
        context_ids=["e-1", "n-1", "c-1"], hypothesis="An animal moves.",
        stage=stage,
    )


# zero backoff keeps the deliberate-failure tests fast
GENERATOR = ModelEndpoint(base_url="http://gen.test/v1", model_id="gen",
                          backoff_base=0.0)
TARGET = ModelEndpoint(base_url="http://clf.test/classify", model_id="clf",
                       backoff_base=0.0)
JUDGES = EnsembleConfig(judges=[
    ModelEndpoint(base_url="http://j1.test/v1", model_id="judge-a", backoff_base=0.0),
    ModelEndpoint(base_url="http://j2.test/v1", model_id="judge-b", backoff_base=0.0),
    ModelEndpoint(base_url="http://j3.test/v1", model_id="judge-c", backoff_base=0.0),
])


class TestCandidateRecords:
    def test_round_trip(self):
        cand = candidate(stage=Stage.VALIDATED)
        cand.target_prediction = NliLabel.NEUTRAL
        cand.verdicts = [JudgeVerdict("judge-a", NliLabel.ENTAILMENT, "entailment"),
                         JudgeVerdict("judge-b", None, "maybe")]
        back = AdversarialCandidate.from_record(cand.to_record())
        assert back == cand

    def test_none_prediction_serialized_as_null(self):
        rec = candidate().to_record()
        assert rec["target_prediction"] is None
        assert rec["stage"] == "generated"

    def test_to_example_carries_target_label(self):
        ex = candidate(target=NliLabel.CONTRADICTION).to_example("adversarial-r0")
        assert ex.label is NliLabel.CONTRADICTION
        assert ex.source == "adversarial-r0"
        assert ex.hypothesis == "An animal moves."

    def test_ensemble_must_not_be_empty(self):
        with pytest.raises(ValueError, match="at least one judge"):
            EnsembleConfig(judges=[])


class TestGenerationPrompt:
    def test_rendering(self):
        query = ExamplePair(id="q-1", premise="Rain falls on the city.",
                            hypothesis=None, label=NliLabel.NEUTRAL, source="unit")
        messages = build_generation_prompt(query, balanced_context(),
                                           NliLabel.CONTRADICTION)
        assert len(messages) == 1
        assert messages[0].role == "user"
        want = (
            "Premise: premise e-1\nLabel: entailment.\nHypothesis: hypothesis e-1\n\n"
            "Premise: premise n-1\nLabel: neutral.\nHypothesis: hypothesis n-1\n\n"
            "Premise: premise c-1\nLabel: contradiction.\nHypothesis: hypothesis c-1\n\n"
            "Premise: Rain falls on the city.\n\n"
            "Now generate a one-sentence hypothesis that contradicts the premise "
            "above. Return only the hypothesis without narration."
        )
        assert messages[0].content == want

    @pytest.mark.parametrize("label,phrase", [
        (NliLabel.ENTAILMENT, "that entails the premise"),
        (NliLabel.NEUTRAL, "that is neutral with the premise"),
        (NliLabel.CONTRADICTION, "that contradicts the premise"),
    ])
    def test_instruction_phrase_per_label(self, label, phrase):
        query = shot("q-1", NliLabel.ENTAILMENT)
        [msg] = build_generation_prompt(query, balanced_context(), label)
        assert phrase in msg.content

    def test_unbalanced_context_rejected(self):
        ctx = balanced_context()
        ctx.per_label_counts[NliLabel.NEUTRAL] = 2
        with pytest.raises(ValueError, match="unbalanced"):
            build_generation_prompt(shot("q-1", NliLabel.NEUTRAL), ctx,
                                    NliLabel.ENTAILMENT)

    def test_hypothesis_free_shot_rejected(self):
        ctx = balanced_context()
        bare = ExamplePair(id="e-1", premise="p", hypothesis=None,
                           label=NliLabel.ENTAILMENT, source="unit")
        ctx.shots[0] = (bare, 0.9)
        with pytest.raises(ValueError, match="'e-1' has no hypothesis"):
            build_generation_prompt(shot("q-1", NliLabel.NEUTRAL), ctx,
                                    NliLabel.ENTAILMENT)


class TestGenerateHypothesis:
    def prompt(self):
        return build_generation_prompt(shot("q-1", NliLabel.NEUTRAL),
                                       balanced_context(), NliLabel.ENTAILMENT)

    def test_plain_reply_passes_through(self):
        got = generate_hypothesis(GENERATOR, self.prompt(),
                                  chat_transport("A dog is outside."))
        assert got == "A dog is outside."

    def test_quotes_stripped(self):
        got = generate_hypothesis(GENERATOR, self.prompt(),
                                  chat_transport('"A dog is outside."'))
        assert got == "A dog is outside."

    def test_multiline_reply_keeps_first_sentence_line(self):
        reply = "\n  A dog is outside.  \nBecause the premise says so."
        got = generate_hypothesis(GENERATOR, self.prompt(), chat_transport(reply))
        assert got == "A dog is outside."

    def test_quote_only_reply_is_empty(self):
        with pytest.raises(ValueError, match="empty hypothesis"):
            generate_hypothesis(GENERATOR, self.prompt(), chat_transport('""'))

    def test_empty_prompt_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            generate_hypothesis(GENERATOR, [], chat_transport("x"))


class TestAdversarialFilter:
    def test_misclassified_candidate_is_kept(self):
        cand = adversarial_filter(TARGET, candidate(target=NliLabel.ENTAILMENT),
                                  classify_transport("neutral"))
        assert cand.stage is Stage.KEPT_BY_FILTER
        assert cand.target_prediction is NliLabel.NEUTRAL

    def test_correctly_classified_candidate_is_dropped(self):
        cand = adversarial_filter(TARGET, candidate(target=NliLabel.ENTAILMENT),
                                  classify_transport("entailment"))
        assert cand.stage is Stage.DROPPED_BY_FILTER
        assert cand.target_prediction is NliLabel.ENTAILMENT

    def test_transport_failure_fails_closed(self, caplog):
        with caplog.at_level("WARNING", logger="nliforge.curation"):
            cand = adversarial_filter(TARGET, candidate(), broken_transport())
        assert cand.stage is Stage.DROPPED_BY_FILTER
        assert cand.target_prediction is None
        assert "classifier failed" in caplog.text

    def test_malformed_response_fails_closed(self):
        garbage = CallableTransport(lambda url, payload: {"verdict": "yes"})
        cand = adversarial_filter(TARGET, candidate(), garbage)
        assert cand.stage is Stage.DROPPED_BY_FILTER

    def test_requires_generated_stage(self):
        with pytest.raises(ValueError, match="kept_by_filter"):
            adversarial_filter(TARGET, candidate(stage=Stage.KEPT_BY_FILTER))


class TestValidateUnanimous:
    def transports(self, *labels):
        return [chat_transport(lab) for lab in labels]

    def test_full_agreement_validates(self):
        trio = self.transports("entailment", "entailment", "entailment")
        cand = validate_unanimous(JUDGES, candidate(stage=Stage.KEPT_BY_FILTER), trio)
        assert cand.stage is Stage.VALIDATED
        assert [v.judge_id for v in cand.verdicts] == ["judge-a", "judge-b", "judge-c"]
        assert all(v.predicted is NliLabel.ENTAILMENT for v in cand.verdicts)

    def test_one_dissent_rejects(self):
        trio = self.transports("entailment", "neutral", "entailment")
        cand = validate_unanimous(JUDGES, candidate(stage=Stage.KEPT_BY_FILTER), trio)
        assert cand.stage is Stage.REJECTED

    def test_every_judge_queried_even_after_dissent(self):
        trio = self.transports("neutral", "entailment", "entailment")
        validate_unanimous(JUDGES, candidate(stage=Stage.KEPT_BY_FILTER), trio)
        assert [t.calls for t in trio] == [1, 1, 1]

    def test_transport_failure_becomes_abstention(self):
        trio = [chat_transport("entailment"), broken_transport(),
                chat_transport("entailment")]
        cand = validate_unanimous(JUDGES, candidate(stage=Stage.KEPT_BY_FILTER), trio)
        assert cand.stage is Stage.REJECTED
        assert cand.verdicts[1].predicted is None
        assert cand.verdicts[1].raw_text.startswith("<transport error:")

    def test_unparsable_reply_becomes_abstention(self):
        trio = self.transports("entailment", "I cannot decide.", "entailment")
        cand = validate_unanimous(JUDGES, candidate(stage=Stage.KEPT_BY_FILTER), trio)
        assert cand.stage is Stage.REJECTED
        assert cand.verdicts[1].predicted is None

    def test_requires_kept_stage(self):
        with pytest.raises(ValueError, match="not kept_by_filter"):
            validate_unanimous(JUDGES, candidate(stage=Stage.GENERATED))


class TestUnanimityRule:
    CHOICES = [NliLabel.ENTAILMENT, NliLabel.NEUTRAL, NliLabel.CONTRADICTION, None]

    def test_exhaustive_three_judges(self):
        """Of the 64 verdict triples, only the all-target one validates."""
        target = NliLabel.NEUTRAL
        winners = []
        for triple in itertools.product(self.CHOICES, repeat=3):
            verdicts = [JudgeVerdict(f"j{i}", p, "") for i, p in enumerate(triple)]
            if unanimous(verdicts, target):
                winners.append(triple)
        assert winners == [(target, target, target)]

    def test_flipping_any_verdict_breaks_unanimity(self):
        target = NliLabel.CONTRADICTION
        base = [JudgeVerdict(f"j{i}", target, "") for i in range(3)]
        assert unanimous(base, target)
        for i in range(3):
            for other in self.CHOICES:
                if other is target:
                    continue
                mutated = list(base)
                mutated[i] = JudgeVerdict(f"j{i}", other, "")
                assert not unanimous(mutated, target)

    def test_empty_verdict_list_is_vacuously_unanimous(self):
        # the pipeline never asks, but the rule itself is a pure all()
        assert unanimous([], NliLabel.ENTAILMENT)
