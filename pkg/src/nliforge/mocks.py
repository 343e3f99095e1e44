"""Built-in deterministic mock backends, addressable via mock:// URLs.

These let every pipeline stage run with zero network access:

  mock://generator            chat generator; reads the target relation and
                              query premise out of the prompt and returns
                              "Mock <label> hypothesis for premise: <premise>"
  mock://judge/echo           judge that replies with the first label token
                              found in the prompt (the generated hypothesis
                              embeds its target label, so this echoes gold)
  mock://judge/<label>        judge that always answers <label>
  mock://judge/abstain        judge that never produces a parsable label
  mock://classify/<label>     classifier that always predicts <label>
  mock://classify/hypothesis-echo
                              classifier that predicts the first label token
                              in the hypothesis (a "perfect" target model)
  mock://embed?dim=N          embedding provider; one deterministic
                              hash-derived vector per input text
"""

from __future__ import annotations

import hashlib
from urllib.parse import parse_qs, urlsplit

from .corpus import LABELS, NliLabel, _LABEL_ALIASES
from .lexical import tokenize
from .wire import TransportError

_GENERATION_PHRASES = {
    "entails": NliLabel.ENTAILMENT,
    "is neutral with": NliLabel.NEUTRAL,
    "contradicts": NliLabel.CONTRADICTION,
}


def first_label_token(text: str) -> NliLabel | None:
    """The first token in the text that parses as a label alias, if any."""
    for token in tokenize(text):
        label = _LABEL_ALIASES.get(token)
        if label is not None:
            return label
    return None


def _chat_response(content: str) -> dict:
    return {"choices": [{"message": {"role": "assistant", "content": content}}]}


def _mock_generate(payload: dict) -> dict:
    messages = payload.get("messages", [])
    if not messages:
        raise TransportError("mock generator: empty message list")
    prompt = messages[-1]["content"]
    target: NliLabel | None = None
    for phrase, label in _GENERATION_PHRASES.items():
        if f"hypothesis that {phrase} the premise above" in prompt:
            target = label
            break
    premise = ""
    for line in prompt.splitlines():
        if line.startswith("Premise: "):
            premise = line[len("Premise: "):]
    if target is None or not premise:
        raise TransportError("mock generator: unrecognized prompt shape")
    return _chat_response(f"Mock {target.value} hypothesis for premise: {premise}")


def _mock_judge(variant: str, payload: dict) -> dict:
    if variant == "abstain":
        return _chat_response("I cannot decide on this one.")
    if variant == "echo":
        prompt = payload.get("messages", [{}])[-1].get("content", "")
        label = first_label_token(prompt)
        if label is None:
            return _chat_response("I cannot decide on this one.")
        return _chat_response(label.value)
    label = _LABEL_ALIASES.get(variant)
    if label is None:
        raise TransportError(f"mock judge: unknown variant {variant!r}")
    return _chat_response(label.value)


def _mock_classify(variant: str, payload: dict) -> dict:
    if variant == "hypothesis-echo":
        label = first_label_token(payload.get("hypothesis", "")) or NliLabel.NEUTRAL
    else:
        label = _LABEL_ALIASES.get(variant)
        if label is None:
            raise TransportError(f"mock classifier: unknown variant {variant!r}")
    scores = {lab.value: (1.0 if lab == label else 0.0) for lab in LABELS}
    return {"label": label.value, "scores": scores}


def hash_vector(text: str, dim: int) -> list[float]:
    """Deterministic pseudo-random vector in [-1, 1]^dim derived from the text."""
    values: list[float] = []
    counter = 0
    while len(values) < dim:
        digest = hashlib.sha256(f"{counter}:{text}".encode("utf-8")).digest()
        for i in range(0, len(digest) - 1, 2):
            if len(values) >= dim:
                break
            raw = digest[i] << 8 | digest[i + 1]
            values.append(raw / 32767.5 - 1.0)
        counter += 1
    return values


def _mock_embed(query: dict, payload: dict) -> dict:
    dim = int(query.get("dim", ["8"])[0])
    texts = payload.get("input", [])
    data = [{"index": i, "embedding": hash_vector(text, dim)}
            for i, text in enumerate(texts)]
    return {"data": data}


def dispatch(url: str, payload: dict) -> dict:
    """Route a mock:// request to the matching backend."""
    parts = urlsplit(url)
    kind = parts.netloc
    segments = [s for s in parts.path.split("/") if s]
    if kind == "generator":
        return _mock_generate(payload)
    if kind == "judge":
        variant = segments[0] if segments else "echo"
        return _mock_judge(variant, payload)
    if kind == "classify":
        variant = segments[0] if segments else "neutral"
        return _mock_classify(variant, payload)
    if kind == "embed":
        return _mock_embed(parse_qs(parts.query), payload)
    raise TransportError(f"unknown mock backend {kind!r} in {url}")
