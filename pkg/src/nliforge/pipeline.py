"""Round orchestration: retrieve, generate, filter, validate, mix, and
optionally hand the mixed file to an external trainer, over T rounds.

Every stage finishes by writing a marker file recording the content hashes
of its outputs plus its endpoint call counts.  A resumed run skips any
stage whose marker still matches its files, so one interruption at any
point yields byte-identical final artifacts.  report.json carries no
timestamps and only paths relative to the output directory for the same
reason.
"""

from __future__ import annotations

import hashlib
import json
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import LABELS, ExamplePair, LabeledCorpus, load_jsonl, save_jsonl
from .curation import (
    AdversarialCandidate,
    EnsembleConfig,
    Stage,
    adversarial_filter,
    build_generation_prompt,
    generate_hypothesis,
    validate_unanimous,
)
from .embeddings import EmbeddingStore, SimilarityMetric, embed_corpus, load_store
from .fusion import FusionConfig, retrieve_context
from .lexical import Bm25Index, Bm25Params, build_index
from .mixer import MixingRatio, SplitMix64, emit_training_file, mix
from .wire import CountingTransport, ModelEndpoint, Transport, resolve_transport

STAGES = ("generate", "filter", "validate", "mix", "train")


class ConfigError(ValueError):
    """Invalid pipeline configuration; collects every problem at once."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


class StageError(RuntimeError):
    """A pipeline stage failed; completed stage markers remain valid."""


@dataclass
class PipelineConfig:
    corpus_path: str
    output_dir: str
    rounds: int = 1
    premises_per_round: int | str = "all"
    seed: int = 0
    ratio: MixingRatio = field(default_factory=MixingRatio)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    generator: ModelEndpoint | None = None
    target: ModelEndpoint | None = None
    embedder: ModelEndpoint | None = None
    ensemble: EnsembleConfig | None = None
    trainer_command: str | None = None
    workers: int = 4

    @classmethod
    def from_json(cls, path: str | Path) -> "PipelineConfig":
        """Parse and validate a config document, reporting all problems."""
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError([f"config file not found: {path}"]) from None
        except json.JSONDecodeError as err:
            raise ConfigError([f"config is not valid JSON: {err.msg}"]) from None
        if not isinstance(raw, dict):
            raise ConfigError(["config must be a JSON object"])

        problems: list[str] = []

        def need_str(key: str) -> str:
            value = raw.get(key)
            if not isinstance(value, str) or not value:
                problems.append(f"{key!r} must be a non-empty string")
                return ""
            return value

        corpus_path = need_str("corpus")
        output_dir = need_str("output_dir")

        rounds = raw.get("rounds", 1)
        if not isinstance(rounds, int) or rounds < 1:
            problems.append(f"'rounds' must be a positive integer, got {rounds!r}")
            rounds = 1

        premises = raw.get("premises_per_round", "all")
        if premises != "all" and (not isinstance(premises, int) or premises < 1):
            problems.append(
                f"'premises_per_round' must be 'all' or a positive integer, got {premises!r}"
            )
            premises = "all"

        seed = raw.get("seed", 0)
        if not isinstance(seed, int):
            problems.append(f"'seed' must be an integer, got {seed!r}")
            seed = 0

        workers = raw.get("workers", 4)
        if not isinstance(workers, int) or workers < 1:
            problems.append(f"'workers' must be a positive integer, got {workers!r}")
            workers = 4

        ratio = MixingRatio()
        if "ratio" in raw:
            try:
                ratio = MixingRatio.parse(str(raw["ratio"]))
            except ValueError as err:
                problems.append(str(err))

        fusion = FusionConfig()
        if "fusion" in raw:
            fusion = _parse_fusion(raw["fusion"], problems)

        generator = _parse_endpoint(raw.get("generator"), "generator", problems,
                                    default_temperature=0.7)
        target = _parse_endpoint(raw.get("target"), "target", problems)
        embedder = _parse_endpoint(raw.get("embedder"), "embedder", problems)

        judges_raw = raw.get("judges")
        ensemble = None
        if not isinstance(judges_raw, list) or not judges_raw:
            problems.append("'judges' must be a non-empty list of endpoints")
        else:
            judges = [
                ep for i, judge in enumerate(judges_raw)
                if (ep := _parse_endpoint(judge, f"judges[{i}]", problems)) is not None
            ]
            if len(judges) == len(judges_raw):
                ensemble = EnsembleConfig(judges=judges)

        trainer_command = raw.get("trainer_command")
        if trainer_command is not None and not isinstance(trainer_command, str):
            problems.append("'trainer_command' must be a string when present")
            trainer_command = None

        if problems:
            raise ConfigError(problems)
        assert generator and target and embedder and ensemble
        return cls(
            corpus_path=corpus_path,
            output_dir=output_dir,
            rounds=rounds,
            premises_per_round=premises,
            seed=seed,
            ratio=ratio,
            fusion=fusion,
            generator=generator,
            target=target,
            embedder=embedder,
            ensemble=ensemble,
            trainer_command=trainer_command,
            workers=workers,
        )

    def report_view(self) -> dict:
        """The config subset echoed into report.json (stable, no paths
        outside the run's own inputs)."""
        assert self.ensemble is not None
        return {
            "alpha": self.fusion.alpha,
            "k": self.fusion.k,
            "mode": self.fusion.mode,
            "metric": self.fusion.metric.value,
            "ratio": str(self.ratio),
            "rounds": self.rounds,
            "premises_per_round": self.premises_per_round,
            "seed": self.seed,
            "judges": len(self.ensemble.judges),
            # without a trainer the same target serves every round, so the
            # loop degrades to single-model candidate mining
            "single_model_mining": self.trainer_command is None,
        }


def _parse_fusion(obj, problems: list[str]) -> FusionConfig:
    if not isinstance(obj, dict):
        problems.append("'fusion' must be an object")
        return FusionConfig()
    kwargs = {}
    if "mode" in obj:
        kwargs["mode"] = obj["mode"]
    if "alpha" in obj:
        kwargs["alpha"] = obj["alpha"]
    if "k" in obj:
        kwargs["k"] = obj["k"]
    if "metric" in obj:
        try:
            kwargs["metric"] = SimilarityMetric(obj["metric"])
        except ValueError:
            problems.append(f"unknown similarity metric {obj['metric']!r}")
    if "bm25" in obj:
        bm = obj["bm25"]
        if not isinstance(bm, dict):
            problems.append("'fusion.bm25' must be an object")
        else:
            try:
                kwargs["bm25"] = Bm25Params(**bm)
            except (TypeError, ValueError) as err:
                problems.append(f"bad BM25 parameters: {err}")
    try:
        return FusionConfig(**kwargs)
    except (TypeError, ValueError) as err:
        problems.append(f"bad fusion config: {err}")
        return FusionConfig()


_ENDPOINT_KEYS = {
    "base_url", "model_id", "temperature", "max_retries", "timeout",
    "max_in_flight", "api_key_env", "fixture_path", "record", "backoff_base",
}


def _parse_endpoint(obj, name: str, problems: list[str],
                    default_temperature: float = 0.0) -> ModelEndpoint | None:
    if obj is None:
        problems.append(f"{name!r} endpoint is required")
        return None
    if not isinstance(obj, dict):
        problems.append(f"{name!r} must be an object")
        return None
    if not isinstance(obj.get("base_url"), str) or not obj.get("base_url"):
        problems.append(f"{name!r} needs a non-empty 'base_url'")
        return None
    unknown = set(obj) - _ENDPOINT_KEYS
    if unknown:
        problems.append(f"{name!r} has unknown keys: {sorted(unknown)}")
        return None
    kwargs = dict(obj)
    kwargs.setdefault("temperature", default_temperature)
    try:
        return ModelEndpoint(**kwargs)
    except (TypeError, ValueError) as err:
        problems.append(f"bad {name!r} endpoint: {err}")
        return None


# --- checkpoint markers ---------------------------------------------------

def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_marker(out_dir: Path, name: str, files: list[Path],
                 calls: dict[str, int], counters: dict, extra: dict | None = None) -> dict:
    """Stamp a completed stage: output hashes, call counts, counters."""
    marker = {
        "files": {str(f.relative_to(out_dir)): _sha256(f) for f in files},
        "calls": dict(sorted(calls.items())),
        "counters": counters,
    }
    if extra:
        marker.update(extra)
    path = out_dir / f".stage-{name}.json"
    path.write_text(json.dumps(marker, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return marker


def load_marker(out_dir: Path, name: str) -> dict | None:
    """A marker is only honored while every stamped file still matches."""
    path = out_dir / f".stage-{name}.json"
    if not path.exists():
        return None
    marker = json.loads(path.read_text(encoding="utf-8"))
    for rel, digest in marker.get("files", {}).items():
        target = out_dir / rel
        if not target.exists() or _sha256(target) != digest:
            return None
    return marker


# --- stage execution ------------------------------------------------------

class _Interrupted(StageError):
    """Raised by the fail_after test hook to simulate a crash."""


def _maybe_interrupt(fail_after: str | None, key: str) -> None:
    if fail_after == key:
        raise _Interrupted(f"interrupted after {key}")


def _round_seed(seed: int, t: int) -> int:
    """Per-round mixing seed, a pure function of (seed, t)."""
    rng = SplitMix64(seed)
    for _ in range(t):
        rng.next_u64()
    return rng.next_u64() % (1 << 31)


def _premise_batch(corpus: LabeledCorpus, cfg: PipelineConfig,
                   t: int) -> list[ExamplePair]:
    """Round t's premise slice, cycling through the corpus across rounds."""
    if cfg.premises_per_round == "all":
        return list(corpus.examples)
    n = len(corpus.examples)
    start = (t * cfg.premises_per_round) % n
    return [corpus.examples[(start + j) % n] for j in range(cfg.premises_per_round)]


def _write_candidates(path: Path, candidates: list[AdversarialCandidate]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for cand in candidates:
            fh.write(json.dumps(cand.to_record(), ensure_ascii=False) + "\n")


def _read_candidates(path: Path) -> list[AdversarialCandidate]:
    out = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(AdversarialCandidate.from_record(json.loads(line)))
    return out


@dataclass
class RoundArtifacts:
    """Everything a finished round contributes to the report."""

    round: int
    counters: dict[str, int]
    calls: dict[str, int]
    files: dict[str, str]
    mixed_manifest: dict | None
    trainer_exit: int | None

    def to_record(self) -> dict:
        return {
            "round": self.round,
            "counters": self.counters,
            "files": dict(sorted(self.files.items())),
            "mixed_manifest": self.mixed_manifest,
            "trainer_exit": self.trainer_exit,
        }


def _counting(endpoint: ModelEndpoint, calls: dict[str, int], key: str) -> Transport:
    return CountingTransport(resolve_transport(endpoint), calls, key)


def run_round(cfg: PipelineConfig, corpus: LabeledCorpus, index: Bm25Index,
              store: EmbeddingStore, t: int,
              fail_after: str | None = None) -> RoundArtifacts:
    """Execute (or skip, when checkpointed) every stage of round t."""
    assert cfg.generator and cfg.target and cfg.embedder and cfg.ensemble
    out = Path(cfg.output_dir)
    round_dir = out / f"round-{t}"
    round_dir.mkdir(parents=True, exist_ok=True)
    counters: dict[str, int] = {}
    calls: dict[str, int] = {}
    files: dict[str, str] = {}
    # once one stage re-runs, everything downstream re-runs too
    fresh = False

    def stage_done(name: str, marker: dict) -> None:
        for rel in marker["files"]:
            files[Path(rel).name] = rel
        for key, value in marker["calls"].items():
            calls[key] = calls.get(key, 0) + value
        counters.update(marker["counters"])

    # generate
    marker = None if fresh else load_marker(out, f"r{t}-generate")
    generated_path = round_dir / "generated.jsonl"
    if marker is None:
        fresh = True
        batch = _premise_batch(corpus, cfg, t)
        stage_calls: dict[str, int] = {}
        transport = _counting(cfg.generator, stage_calls, "generator")

        def generate_one(item: tuple[int, ExamplePair]) -> AdversarialCandidate:
            i, ex = item
            target_label = LABELS[i % len(LABELS)]
            context = retrieve_context(ex, corpus, index, store, cfg.fusion)
            prompt = build_generation_prompt(ex, context, target_label)
            hypothesis = generate_hypothesis(cfg.generator, prompt, transport)
            return AdversarialCandidate(
                id=f"r{t}-{i:05d}",
                round=t,
                premise=ex.premise,
                target_label=target_label,
                context_ids=context.shot_ids(),
                hypothesis=hypothesis,
            )

        try:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                candidates = list(pool.map(generate_one, enumerate(batch)))
        except Exception as err:
            raise StageError(f"round {t} generate failed: {err}") from err
        _write_candidates(generated_path, candidates)
        marker = write_marker(out, f"r{t}-generate", [generated_path], stage_calls,
                              {"generated": len(candidates)})
    stage_done("generate", marker)
    _maybe_interrupt(fail_after, f"r{t}-generate")

    # filter
    marker = None if fresh else load_marker(out, f"r{t}-filter")
    filtered_path = round_dir / "filtered.jsonl"
    if marker is None:
        fresh = True
        candidates = _read_candidates(generated_path)
        stage_calls = {}
        transport = _counting(cfg.target, stage_calls, "target")
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            candidates = list(pool.map(
                lambda c: adversarial_filter(cfg.target, c, transport), candidates))
        _write_candidates(filtered_path, candidates)
        kept = sum(1 for c in candidates if c.stage == Stage.KEPT_BY_FILTER)
        marker = write_marker(out, f"r{t}-filter", [filtered_path], stage_calls,
                              {"kept": kept, "dropped": len(candidates) - kept})
    stage_done("filter", marker)
    _maybe_interrupt(fail_after, f"r{t}-filter")

    # validate
    marker = None if fresh else load_marker(out, f"r{t}-validate")
    candidates_path = round_dir / "candidates.jsonl"
    validated_path = round_dir / "validated.jsonl"
    if marker is None:
        fresh = True
        candidates = _read_candidates(filtered_path)
        stage_calls = {}
        judge_transports = [
            _counting(judge, stage_calls, judge.model_id or f"judge-{i}")
            for i, judge in enumerate(cfg.ensemble.judges)
        ]

        def validate_one(cand: AdversarialCandidate) -> AdversarialCandidate:
            if cand.stage != Stage.KEPT_BY_FILTER:
                return cand
            return validate_unanimous(cfg.ensemble, cand, judge_transports)

        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            candidates = list(pool.map(validate_one, candidates))
        candidates.sort(key=lambda c: c.id)
        _write_candidates(candidates_path, candidates)
        validated = [c for c in candidates if c.stage == Stage.VALIDATED]
        save_jsonl([c.to_example(source=f"adversarial-r{t}") for c in validated],
                   validated_path)
        marker = write_marker(
            out, f"r{t}-validate", [candidates_path, validated_path], stage_calls,
            {"validated": len(validated),
             "rejected": sum(1 for c in candidates if c.stage == Stage.REJECTED)})
    stage_done("validate", marker)
    _maybe_interrupt(fail_after, f"r{t}-validate")

    # mix
    marker = None if fresh else load_marker(out, f"r{t}-mix")
    ratio_slug = str(cfg.ratio).replace(":", "-")
    mixed_path = round_dir / f"mixed-{ratio_slug}.jsonl"
    if marker is None:
        fresh = True
        adversarial = list(load_jsonl(validated_path).examples)
        if not adversarial:
            # judges validated nothing; the round completes with no mix
            marker = write_marker(out, f"r{t}-mix", [], {}, {"mixed": 0},
                                  extra={"manifest": None})
        else:
            try:
                result = mix(corpus, adversarial, cfg.ratio, _round_seed(cfg.seed, t))
            except ValueError as err:
                raise StageError(f"round {t} mix failed: {err}") from err
            emit_training_file(result, mixed_path)
            marker = write_marker(
                out, f"r{t}-mix", [mixed_path, round_dir / "manifest.json"], {},
                {"mixed": len(result.examples)}, extra={"manifest": result.manifest})
    stage_done("mix", marker)
    mixed_manifest = marker.get("manifest")
    _maybe_interrupt(fail_after, f"r{t}-mix")

    # train (optional, delegated to an external command)
    trainer_exit: int | None = None
    if cfg.trainer_command is not None:
        marker = None if fresh else load_marker(out, f"r{t}-train")
        if marker is None:
            if mixed_manifest is None:
                marker = write_marker(out, f"r{t}-train", [], {}, {},
                                      extra={"trainer_exit": None})
            else:
                command = cfg.trainer_command.format(
                    mixed_file=mixed_path, round=t, output_dir=out)
                try:
                    proc = subprocess.run(shlex.split(command), check=False)
                except OSError as err:
                    raise StageError(f"round {t} trainer failed to start: {err}") from err
                marker = write_marker(out, f"r{t}-train", [], {}, {},
                                      extra={"trainer_exit": proc.returncode})
        stage_done("train", marker)
        trainer_exit = marker.get("trainer_exit")
        _maybe_interrupt(fail_after, f"r{t}-train")

    return RoundArtifacts(
        round=t,
        counters=counters,
        calls=calls,
        files={name: str(Path(rel)) for name, rel in files.items()},
        mixed_manifest=mixed_manifest,
        trainer_exit=trainer_exit,
    )


def prepare_artifacts(cfg: PipelineConfig, fail_after: str | None = None
                      ) -> tuple[LabeledCorpus, Bm25Index, EmbeddingStore, dict[str, int]]:
    """Build (or reload) the lexical index and embedding store."""
    assert cfg.embedder is not None
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = load_jsonl(cfg.corpus_path)
    if not corpus.examples:
        raise StageError(f"corpus {cfg.corpus_path} is empty")
    index_path = out / "index.json"
    store_path = out / "embeddings.jsonl"
    marker = load_marker(out, "prepare")
    if marker is None:
        calls: dict[str, int] = {}
        transport = _counting(cfg.embedder, calls, "embedder")
        index = build_index(corpus, cfg.fusion.bm25)
        index.save(index_path)
        store = embed_corpus(cfg.embedder, corpus, store_path=store_path,
                             transport=transport)
        marker = write_marker(out, "prepare", [index_path, store_path], calls, {})
    else:
        index = Bm25Index.load(index_path)
        store = load_store(store_path, model_id=cfg.embedder.model_id)
    _maybe_interrupt(fail_after, "prepare")
    return corpus, index, store, dict(marker["calls"])


def run_pipeline(cfg: PipelineConfig, fail_after: str | None = None) -> dict:
    """Run all T rounds and write report.json; returns the report dict.

    ``fail_after`` names a stage key ("prepare", "r0-generate", ...) after
    whose completion a simulated crash is raised; rerunning without it
    resumes from the markers.
    """
    corpus, index, store, prepare_calls = prepare_artifacts(cfg, fail_after)
    rounds = []
    for t in range(cfg.rounds):
        rounds.append(run_round(cfg, corpus, index, store, t, fail_after))

    totals: dict[str, int] = {}
    endpoint_calls = dict(prepare_calls)
    for art in rounds:
        for key, value in art.counters.items():
            totals[key] = totals.get(key, 0) + value
        for key, value in art.calls.items():
            endpoint_calls[key] = endpoint_calls.get(key, 0) + value

    report = {
        "config": cfg.report_view(),
        "rounds": [art.to_record() for art in rounds],
        "totals": dict(sorted(totals.items())),
        "endpoint_calls": dict(sorted(endpoint_calls.items())),
    }
    report_path = Path(cfg.output_dir) / "report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                           encoding="utf-8")
    return report
