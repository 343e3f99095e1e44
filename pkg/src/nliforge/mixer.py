"""Training-set assembly: blend original examples back into the adversarial
pool at a fixed ratio so the target model keeps its general competence.

Sampling and shuffling run on a single splitmix64 stream seeded from the
config, so a (ratio, seed, inputs) triple always produces byte-identical
output files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .corpus import ExamplePair, LabeledCorpus, save_jsonl

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Tiny deterministic PRNG; the exact output sequence is part of the
    on-disk contract, so this stays hand-rolled rather than delegating to
    ``random`` whose internals we do not pin."""

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Unbiased integer in [0, bound) via masked rejection."""
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        mask = (1 << bound.bit_length()) - 1
        while True:
            value = self.next_u64() & mask
            if value < bound:
                return value

    def sample(self, population: list, k: int) -> list:
        """k items without replacement, by partial Fisher-Yates from the front."""
        if k > len(population):
            raise ValueError(f"cannot sample {k} from {len(population)}")
        pool = list(population)
        for i in range(k):
            j = i + self.below(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates from the back."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


@dataclass(frozen=True)
class MixingRatio:
    """orig_parts originals per adv_parts adversarial examples.

    ``orig_parts="all"`` means the full original corpus joins the mix
    regardless of adversarial count.
    """

    orig_parts: int | str = 1
    adv_parts: int = 4

    def __post_init__(self) -> None:
        if self.orig_parts != "all":
            if not isinstance(self.orig_parts, int) or self.orig_parts < 0:
                raise ValueError(f"orig_parts must be 'all' or a non-negative int, "
                                 f"got {self.orig_parts!r}")
        if not isinstance(self.adv_parts, int) or self.adv_parts < 1:
            raise ValueError(f"adv_parts must be a positive int, got {self.adv_parts!r}")

    @classmethod
    def parse(cls, text: str) -> "MixingRatio":
        head, sep, tail = text.partition(":")
        if not sep:
            raise ValueError(f"ratio must look like 'orig:adv', got {text!r}")
        orig: int | str
        if head.strip().lower() == "all":
            orig = "all"
        else:
            try:
                orig = int(head)
            except ValueError:
                raise ValueError(f"bad orig part in ratio {text!r}") from None
        try:
            adv = int(tail)
        except ValueError:
            raise ValueError(f"bad adv part in ratio {text!r}") from None
        return cls(orig, adv)

    def __str__(self) -> str:
        return f"{self.orig_parts}:{self.adv_parts}"


@dataclass
class MixResult:
    examples: list[ExamplePair]
    manifest: dict


def mix(original: LabeledCorpus, adversarial: list[ExamplePair],
        ratio: MixingRatio, seed: int) -> MixResult:
    """Assemble a training set: all adversarial examples plus a sampled
    slice of the originals, jointly shuffled.

    The original count is floor(n_adv * orig_parts / adv_parts); the
    sample is drawn without replacement in corpus order before the final
    shuffle, all on one seeded stream.
    """
    if not adversarial:
        raise ValueError("adversarial pool is empty, nothing to mix")
    n_adv = len(adversarial)
    if ratio.orig_parts == "all":
        n_orig = len(original.examples)
    else:
        n_orig = math.floor(n_adv * ratio.orig_parts / ratio.adv_parts)
    if n_orig > len(original.examples):
        raise ValueError(
            f"not enough original examples: need {n_orig}, have {len(original.examples)}"
        )
    rng = SplitMix64(seed)
    if ratio.orig_parts == "all":
        sampled = list(original.examples)
    else:
        sampled = rng.sample(original.examples, n_orig)
    combined = list(adversarial) + sampled
    rng.shuffle(combined)
    sources: dict[str, int] = {}
    for ex in combined:
        sources[ex.source] = sources.get(ex.source, 0) + 1
    manifest = {
        "ratio": str(ratio),
        "n_orig": n_orig,
        "n_adv": n_adv,
        "n_total": n_adv + n_orig,
        "seed": seed,
        "sources": dict(sorted(sources.items())),
    }
    return MixResult(examples=combined, manifest=manifest)


def emit_training_file(result: MixResult, path: str | Path) -> Path:
    """Write the mixed examples as JSONL with an adjacent manifest.json."""
    if not result.examples:
        raise ValueError("refusing to write an empty training file")
    path = Path(path)
    save_jsonl(result.examples, path)
    manifest_path = path.with_name("manifest.json")
    manifest_path.write_text(
        json.dumps(result.manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return path
