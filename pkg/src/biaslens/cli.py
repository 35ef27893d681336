"""Command line interface.

Subcommands mirror the pipeline: fetch -> corpus build -> train ->
lexicon expand -> audit run / audit plots.  Exit codes for `audit run`:
0 success, 1 validation failure, 2 partial slice failure (report still
written).
"""

from __future__ import annotations

import json
import os
import sys
from datetime import date
from pathlib import Path

import click

from . import __version__
from .acquisition import (
    GUARDIAN_API_KEY_ENV,
    fetch_guardian,
    load_jsonl,
    load_plaintext_dir,
    LoadStats,
)
from .audit import AuditConfig, emit_plot_data, run_audit, validate, AuditReport
from .corpus import CACHE_MAGIC, TokenizeConfig, build_corpus, load_corpus, save_corpus
from .embedding import TrainConfig, export_text_vectors, load_model, save_model, train_cbow
from .errors import BiasLensError
from .lexicon import expand, load_lexicon, save_lexicon


@click.group()
@click.version_option(version=__version__, prog_name="biaslens")
@click.option("--seed", type=int, default=None, help="Global RNG seed (overrides config/defaults).")
@click.option("--threads", type=int, default=None, help="Training threads; >1 is nondeterministic.")
@click.option("--strict/--lenient", "strict", default=True,
              help="Strict mode fails on malformed input; lenient skips and counts it.")
@click.pass_context
def main(ctx: click.Context, seed: int | None, threads: int | None, strict: bool) -> None:
    """Audit text corpora for gender bias."""
    ctx.ensure_object(dict)
    ctx.obj.update(seed=seed, threads=threads, strict=strict)


@main.group()
def fetch() -> None:
    """Download documents into a JSONL corpus."""


@fetch.command("guardian")
@click.option("--from", "from_str", required=True, metavar="YYYY-MM-DD", help="Start date (inclusive).")
@click.option("--to", "to_str", required=True, metavar="YYYY-MM-DD", help="End date (inclusive).")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--page-size", default=50, show_default=True, type=click.IntRange(1, 200))
@click.option("--content-type", default="article", show_default=True,
              help="Guardian content type filter; use 'all' to disable.")
def fetch_guardian_cmd(from_str: str, to_str: str, out_path: Path, page_size: int, content_type: str) -> None:
    """Fetch Guardian articles via the Open Platform content API.

    Reads the API key from the GUARDIAN_API_KEY environment variable (never
    from a flag, to keep it out of shell history).  Resumable: re-running
    skips article ids already present in the output file.
    """
    api_key = os.environ.get(GUARDIAN_API_KEY_ENV, "")
    if not api_key:
        raise click.ClickException(f"set the {GUARDIAN_API_KEY_ENV} environment variable")
    try:
        manifest = fetch_guardian(
            api_key,
            date.fromisoformat(from_str),
            date.fromisoformat(to_str),
            page_size,
            out_path,
            content_type=None if content_type == "all" else content_type,
        )
    except (BiasLensError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"wrote {manifest.documents_written} documents to {manifest.output_path}")
    for where, reason in manifest.failures:
        click.echo(f"failure: {where}: {reason}", err=True)
    if manifest.failures:
        sys.exit(2)


@main.group()
def corpus() -> None:
    """Build and inspect tokenized corpora."""


@corpus.command("build")
@click.option("--in", "inputs", required=True, multiple=True,
              type=click.Path(exists=True, path_type=Path),
              help="JSONL corpus file or directory of .txt files; repeatable.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--tokenizer-config", "tokenizer_path", default=None,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='JSON tokenizer settings, e.g. {"lowercase": true}.')
@click.option("--filename-pattern", default=None, metavar="PATTERN",
              help="Year pattern for .txt filenames, e.g. 'YYYY_*'.")
@click.option("--source", default="", help="Source label for directory inputs.")
@click.pass_context
def corpus_build(ctx: click.Context, inputs: tuple[Path, ...], out_path: Path,
                 tokenizer_path: Path | None, filename_pattern: str | None, source: str) -> None:
    """Tokenize documents into the cached corpus format."""
    strict = ctx.obj["strict"]
    stats = LoadStats()
    docs = []
    try:
        rules = TokenizeConfig()
        if tokenizer_path is not None:
            with tokenizer_path.open(encoding="utf-8") as fh:
                rules = TokenizeConfig(**json.load(fh))
        for inp in inputs:
            if inp.is_dir():
                docs.extend(load_plaintext_dir(inp, metadata_rule=filename_pattern,
                                               source=source, strict=strict, stats=stats))
            else:
                docs.extend(load_jsonl(inp, strict=strict, stats=stats))
        built = build_corpus(docs, rules)
        save_corpus(built, out_path, rules)
    except (BiasLensError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"wrote {len(built)} documents ({built.token_count} tokens) to {out_path}")
    if stats.skipped:
        click.echo(f"skipped {stats.skipped} malformed records", err=True)


@main.command("train")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, path_type=Path),
              help="Corpus cache from `corpus build`, or a JSONL corpus.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--dim", default=100, show_default=True, type=int)
@click.option("--window", default=5, show_default=True, type=int)
@click.option("--negatives", default=5, show_default=True, type=int)
@click.option("--epochs", default=5, show_default=True, type=int)
@click.option("--min-count", default=5, show_default=True, type=int)
@click.option("--export-text", "text_path", default=None, type=click.Path(dir_okay=False, path_type=Path),
              help="Also export vectors in the common text format.")
@click.pass_context
def train_cmd(ctx: click.Context, corpus_path: Path, out_path: Path, dim: int, window: int,
              negatives: int, epochs: int, min_count: int, text_path: Path | None) -> None:
    """Train a CBOW embedding model on a corpus."""
    try:
        built = _read_corpus_any(corpus_path, strict=ctx.obj["strict"])
        config = TrainConfig(dim=dim, window=window, negatives=negatives, epochs=epochs,
                             min_count=min_count, seed=ctx.obj["seed"] if ctx.obj["seed"] is not None else 1)
        model = train_cbow(built, config, threads=ctx.obj["threads"] or 1)
        save_model(model, out_path)
        if text_path is not None:
            export_text_vectors(model, text_path)
    except (BiasLensError, ValueError, FloatingPointError) as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"trained {len(model.vocab)} x {dim} model on {built.token_count} tokens -> {out_path}")


def _read_corpus_any(path: Path, strict: bool):
    with path.open("r", encoding="utf-8") as fh:
        first = fh.readline()
    try:
        is_cache = json.loads(first).get("magic") == CACHE_MAGIC
    except (json.JSONDecodeError, AttributeError):
        is_cache = False
    if is_cache:
        return load_corpus(path)
    return build_corpus(load_jsonl(path, strict=strict), TokenizeConfig())


@main.group("lexicon")
def lexicon_group() -> None:
    """Create and expand word lexicons."""


@lexicon_group.command("expand")
@click.option("--seed", "seed_path", required=True, type=click.Path(exists=True, path_type=Path),
              help="Seed lexicon TSV (word/category/provenance).")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--k", default=10, show_default=True, type=int, help="Neighbors per seed word.")
@click.option("--min-sim", default=0.4, show_default=True, type=float)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
def lexicon_expand(seed_path: Path, model_path: Path, k: int, min_sim: float, out_path: Path) -> None:
    """Grow a seed lexicon with embedding nearest neighbors."""
    try:
        seed = load_lexicon(seed_path)
        model = load_model(model_path)
        expanded = expand(seed, model, per_word_k=k, min_similarity=min_sim)
        save_lexicon(expanded, out_path)
    except (BiasLensError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"expanded {len(seed)} -> {len(expanded)} words -> {out_path}")


@main.group("audit")
def audit_group() -> None:
    """Run audits and export plot data."""


@audit_group.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False, path_type=Path),
              help="Output directory (defaults to the config's output_dir).")
@click.pass_context
def audit_run(ctx: click.Context, config_path: Path, out_dir: Path | None) -> None:
    """Run the full audit pipeline described by a JSON config."""
    try:
        config = AuditConfig.from_file(config_path)
    except (ValueError, json.JSONDecodeError) as exc:
        click.echo(f"invalid config: {exc}", err=True)
        sys.exit(1)
    if ctx.obj["seed"] is not None:
        config.seed = ctx.obj["seed"]
        config.train["seed"] = ctx.obj["seed"]
    if ctx.obj["threads"] is not None:
        config.threads = ctx.obj["threads"]
    config.strict = ctx.obj["strict"]
    problems = validate(config)
    if problems:
        for p in problems:
            click.echo(f"config problem: {p}", err=True)
        sys.exit(1)
    try:
        report = run_audit(config, output_dir=out_dir)
    except (BiasLensError, ValueError, OSError) as exc:
        click.echo(f"audit failed: {exc}", err=True)
        sys.exit(1)
    target = out_dir if out_dir is not None else config.resolve(config.output_dir or ".")
    click.echo(f"report written to {Path(target) / 'report.json'} ({len(report.slices)} slices)")
    failed = report.slice_errors()
    if failed:
        for label, errs in failed.items():
            for metric, message in errs.items():
                click.echo(f"slice {label}: {metric} failed: {message}", err=True)
        sys.exit(2)


@audit_group.command("plots")
@click.option("--report", "report_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
def audit_plots(report_path: Path, out_dir: Path) -> None:
    """Re-emit plot CSVs from an existing report.json."""
    try:
        with Path(report_path).open("r", encoding="utf-8") as fh:
            report = AuditReport.from_dict(json.load(fh))
        written = emit_plot_data(report, out_dir)
    except (BiasLensError, ValueError, KeyError, OSError) as exc:
        raise click.ClickException(str(exc)) from exc
    for path in written:
        click.echo(str(path))


if __name__ == "__main__":
    main()
