"""Clients for the generator LLM, judge LLMs, and the target NLI classifier.

All three speak fixed wire contracts so hosted models, local servers, and
the built-in mocks are interchangeable:

  * chat models:  POST {base_url}/chat/completions with
    ``{"model", "messages", "temperature"}``; the reply's first choice
    message content is the completion.
  * classifier:   POST {base_url} with ``{"premise", "hypothesis"}``;
    response ``{"label": str, "scores": {label: float}}``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .corpus import NliLabel, _LABEL_ALIASES, parse_label
from .lexical import tokenize
from .wire import ModelEndpoint, Transport, post_with_retries

log = logging.getLogger(__name__)

_ROLES = ("system", "user", "assistant")

JUDGE_PROMPT = (
    'Given the premise "{premise}", does the hypothesis "{hypothesis}" follow? '
    "Answer with exactly one word: entailment, neutral, or contradiction."
)


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in _ROLES:
            raise ValueError(f"invalid role {self.role!r}")
        if self.role in ("user", "assistant") and not self.content:
            raise ValueError(f"{self.role} message content must be non-empty")

    def to_wire(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass
class JudgeVerdict:
    """One referee's read of a premise/hypothesis pair.

    ``predicted`` is None when the reply could not be parsed as a label;
    the raw reply is always preserved for later re-analysis.
    """

    judge_id: str
    predicted: NliLabel | None
    raw_text: str

    @property
    def abstained(self) -> bool:
        return self.predicted is None

    def to_record(self) -> dict:
        return {
            "judge_id": self.judge_id,
            "predicted": self.predicted.value if self.predicted else "abstain",
            "raw_text": self.raw_text,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "JudgeVerdict":
        predicted = None if rec["predicted"] == "abstain" else parse_label(rec["predicted"])
        return cls(judge_id=rec["judge_id"], predicted=predicted, raw_text=rec["raw_text"])


def chat_complete(endpoint: ModelEndpoint, messages: list[ChatMessage],
                  transport: Transport | None = None) -> str:
    """Run one chat completion and return the assistant text."""
    if not messages:
        raise ValueError("chat completion needs at least one message")
    url = endpoint.base_url.rstrip("/") + "/chat/completions"
    payload = {
        "model": endpoint.model_id,
        "messages": [m.to_wire() for m in messages],
        "temperature": endpoint.temperature,
    }
    response = post_with_retries(endpoint, url, payload, transport)
    try:
        content = response["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise ValueError(f"malformed chat completion response from {endpoint.base_url}") from None
    if not content:
        raise ValueError(f"empty completion from {endpoint.base_url}")
    return content


def classify_nli(endpoint: ModelEndpoint, premise: str, hypothesis: str,
                 transport: Transport | None = None) -> NliLabel:
    """Ask the target classifier for its label on one pair."""
    if not premise or not hypothesis:
        raise ValueError("premise and hypothesis must be non-empty")
    payload = {"premise": premise, "hypothesis": hypothesis}
    response = post_with_retries(endpoint, endpoint.base_url, payload, transport)
    try:
        raw = response["label"]
    except (KeyError, TypeError):
        raise ValueError(f"classifier response missing 'label': {response!r}") from None
    return parse_label(raw)


# Judge replies are prose, so verb forms count as label tokens there even
# though corpus label parsing stays strict.
_REPLY_TOKENS = dict(_LABEL_ALIASES)
_REPLY_TOKENS["entails"] = NliLabel.ENTAILMENT
_REPLY_TOKENS["contradicts"] = NliLabel.CONTRADICTION


def parse_judge_reply(text: str) -> NliLabel | None:
    """First label token in the reply, or None (abstain) if there is none."""
    for token in tokenize(text):
        label = _REPLY_TOKENS.get(token)
        if label is not None:
            return label
    return None


def judge_label(endpoint: ModelEndpoint, premise: str, hypothesis: str,
                transport: Transport | None = None) -> JudgeVerdict:
    """Query one judge with the zero-shot judging prompt.

    Unparsable replies become abstentions, never exceptions; transport
    failures propagate to the caller.
    """
    if not premise or not hypothesis:
        raise ValueError("premise and hypothesis must be non-empty")
    prompt = JUDGE_PROMPT.format(premise=premise, hypothesis=hypothesis)
    reply = chat_complete(endpoint, [ChatMessage("user", prompt)], transport)
    predicted = parse_judge_reply(reply)
    if predicted is None:
        log.debug("judge %s abstained: %r", endpoint.model_id, reply)
    return JudgeVerdict(judge_id=endpoint.model_id or endpoint.base_url,
                        predicted=predicted, raw_text=reply)
