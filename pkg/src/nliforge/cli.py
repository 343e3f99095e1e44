"""Command-line front end.

Exit codes: 0 success, 1 configuration/validation problem, 2 runtime
stage failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .analysis import length_stats, metric_benchmark, tfidf_matrix, top_terms
from .corpus import CorpusError, LabeledCorpus, load_jsonl, save_jsonl
from .embeddings import SimilarityMetric, embed_corpus, load_store
from .fusion import FusionConfig, retrieve_context, save_sweep, tune_alpha
from .lexical import Bm25Index, Bm25Params, build_index
from .mixer import MixingRatio, emit_training_file, mix
from .pipeline import ConfigError, PipelineConfig, StageError, run_pipeline
from .wire import ModelEndpoint, TransportError


@click.group()
def cli() -> None:
    """Adversarial NLI data curation toolkit."""


@cli.command()
@click.argument("inputs", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def ingest(inputs: tuple[str, ...], out: str) -> None:
    """Validate and merge corpus JSONL files into one canonical file."""
    merged = LabeledCorpus()
    for path in inputs:
        for ex in load_jsonl(path):
            merged.add(ex)
    save_jsonl(merged, out)
    click.echo(f"wrote {len(merged)} examples to {out}")


@cli.command("index")
@click.argument("corpus_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--k1", default=1.5, show_default=True)
@click.option("--b", default=0.75, show_default=True)
def index_cmd(corpus_path: str, out: str, k1: float, b: float) -> None:
    """Build the BM25 index over premises."""
    corpus = load_jsonl(corpus_path)
    idx = build_index(corpus, Bm25Params(k1=k1, b=b))
    idx.save(out)
    click.echo(f"indexed {idx.doc_count} premises into {out}")


@cli.command()
@click.argument("corpus_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--base-url", required=True)
@click.option("--model-id", default="")
@click.option("--batch-size", default=32, show_default=True)
@click.option("--api-key-env", default=None)
@click.option("--fixture", default=None, type=click.Path(dir_okay=False))
def embed(corpus_path: str, out: str, base_url: str, model_id: str,
          batch_size: int, api_key_env: str | None, fixture: str | None) -> None:
    """Fetch premise embeddings and store them on disk."""
    corpus = load_jsonl(corpus_path)
    endpoint = ModelEndpoint(base_url=base_url, model_id=model_id,
                             api_key_env=api_key_env, fixture_path=fixture)
    store = embed_corpus(endpoint, corpus, store_path=out, batch_size=batch_size)
    click.echo(f"stored {len(store)} embeddings (dim {store.dim}) in {out}")


@cli.command("tune-alpha")
@click.argument("corpus_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--index", "index_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--store", "store_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--grid-step", default=0.01, show_default=True)
@click.option("--metric", default="cosine", show_default=True)
@click.option("--out", default=None, type=click.Path(dir_okay=False))
def tune_alpha_cmd(corpus_path: str, index_path: str, store_path: str,
                   grid_step: float, metric: str, out: str | None) -> None:
    """Sweep the fusion weight over its grid and report the AUC-best value."""
    corpus = load_jsonl(corpus_path)
    idx = Bm25Index.load(index_path)
    store = load_store(store_path)
    result = tune_alpha(corpus, idx, store, grid_step=grid_step,
                        metric=SimilarityMetric(metric))
    if out:
        save_sweep(result, out)
    click.echo(f"best alpha {result.best_alpha:.2f} with AUC {result.best_auc:.4f}")


@cli.command()
@click.argument("corpus_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--index", "index_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--store", "store_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--query-id", required=True)
@click.option("--mode", default="comb", show_default=True,
              type=click.Choice(["sem", "lex", "comb"]))
@click.option("--alpha", default=0.83, show_default=True)
@click.option("--k", default=1, show_default=True)
def retrieve(corpus_path: str, index_path: str, store_path: str, query_id: str,
             mode: str, alpha: float, k: int) -> None:
    """Print the balanced few-shot context retrieved for one example."""
    corpus = load_jsonl(corpus_path)
    idx = Bm25Index.load(index_path)
    store = load_store(store_path)
    cfg = FusionConfig(mode=mode, alpha=alpha, k=k)
    try:
        query = corpus.get(query_id)
    except KeyError:
        raise click.ClickException(f"no example with id {query_id!r} in {corpus_path}")
    context = retrieve_context(query, corpus, idx, store, cfg)
    for ex, score in context.shots:
        click.echo(json.dumps({"id": ex.id, "label": ex.label.value,
                               "score": score, "premise": ex.premise,
                               "hypothesis": ex.hypothesis}, ensure_ascii=False))


@cli.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--rounds", default=None, type=int,
              help="Override the configured round count.")
@click.option("--resume", is_flag=True,
              help="Keep existing stage checkpoints instead of starting clean.")
def run(config_path: str, rounds: int | None, resume: bool) -> None:
    """Run the full curation pipeline."""
    cfg = PipelineConfig.from_json(config_path)
    if rounds is not None:
        if rounds < 1:
            raise ConfigError([f"'rounds' must be a positive integer, got {rounds}"])
        cfg.rounds = rounds
    if not resume:
        for marker in Path(cfg.output_dir).glob(".stage-*.json"):
            marker.unlink()
    report = run_pipeline(cfg)
    click.echo(json.dumps(report["totals"], sort_keys=True))


@cli.command("mix")
@click.option("--originals", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--adversarial", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--ratio", default="1:4", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def mix_cmd(originals: str, adversarial: str, ratio: str, seed: int, out: str) -> None:
    """Blend originals into an adversarial set and write the training file."""
    orig = load_jsonl(originals)
    adv = list(load_jsonl(adversarial).examples)
    result = mix(orig, adv, MixingRatio.parse(ratio), seed)
    emit_training_file(result, out)
    # the ratio notation is easy to read backwards, so spell the counts out
    click.echo(f"mixed {result.manifest['n_adv']} adversarial + "
               f"{result.manifest['n_orig']} original examples into {out}")


@cli.command()
@click.argument("datasets", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--store", "store_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Embedding store for the similarity-metric benchmark.")
@click.option("--benchmark-k", default=3, show_default=True)
@click.option("--sweep", "sweep_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Fusion-weight sweep JSONL to convert into plot data.")
@click.option("--top-n", default=10, show_default=True)
def analyze(datasets: tuple[str, ...], out_dir: str, store_path: str | None,
            benchmark_k: int, sweep_path: str | None, top_n: int) -> None:
    """Corpus analytics: similarity matrices, length stats, frequent terms."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpora = [load_jsonl(p) for p in datasets]
    names = [Path(p).stem for p in datasets]
    report: dict = {"datasets": {}, "tf_weighting": "raw term count"}
    for name, corpus in zip(names, corpora):
        entry: dict = {"examples": len(corpus),
                       "top_terms": top_terms(corpus, top_n)}
        try:
            entry["length"] = length_stats(corpus)
        except ValueError:
            entry["length"] = None
        report["datasets"][name] = entry
    if len(corpora) >= 2:
        sim = tfidf_matrix(corpora, names)
        (out / "tfidf.csv").write_text(sim.to_csv(), encoding="utf-8")
        report["tfidf"] = sim.to_record()
    if store_path:
        store = load_store(store_path)
        report["metric_benchmark"] = metric_benchmark(store, corpora[0], benchmark_k)
    if sweep_path:
        xs, ys = [], []
        with Path(sweep_path).open("r", encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                if "alpha" in rec:
                    xs.append(rec["alpha"])
                    ys.append(rec["auc"])
        (out / "alpha_sweep_plot.json").write_text(
            json.dumps({"x": xs, "y": ys, "x_label": "alpha", "y_label": "auc"},
                       indent=2) + "\n", encoding="utf-8")
    (out / "analysis.json").write_text(
        json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8")
    click.echo(f"wrote analysis for {len(corpora)} dataset(s) to {out}")


@cli.command()
@click.argument("output_dir", type=click.Path(exists=True, file_okay=False))
def report(output_dir: str) -> None:
    """Summarize a finished pipeline run."""
    path = Path(output_dir) / "report.json"
    if not path.exists():
        raise StageError(f"no report.json under {output_dir} (run incomplete?)")
    data = json.loads(path.read_text(encoding="utf-8"))
    for art in data["rounds"]:
        counters = art["counters"]
        click.echo(f"round {art['round']}: " +
                   ", ".join(f"{key}={counters[key]}" for key in sorted(counters)))
    totals = data["totals"]
    click.echo("totals: " + ", ".join(f"{key}={totals[key]}" for key in sorted(totals)))


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as err:
        err.show()
        return 1
    except click.ClickException as err:
        err.show()
        return 1
    except click.Abort:
        return 1
    except (ConfigError, CorpusError, ValueError) as err:
        click.echo(f"error: {err}", err=True)
        return 1
    except (StageError, TransportError, OSError) as err:
        click.echo(f"error: {err}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
