"""Config-driven orchestration: ingest -> slice -> train -> metrics -> report.

An audit is described by a single JSON config document.  run_audit
materializes every default into the report, so the report alone documents
the run; given the same seed and single-threaded training, re-running
produces a byte-identical report.json (timings aside).

Relative paths inside a config resolve against the config file's
directory.  The output directory is an invocation detail and is not
echoed into the report.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version as pkg_version
from pathlib import Path
from typing import Any, Optional

from . import metrics as metrics_mod
from .acquisition import LoadStats, load_jsonl, load_plaintext_dir
from .corpus import Corpus, CorpusView, TokenizeConfig, build_corpus, slice_corpus
from .embedding import EmbeddingModel, TrainConfig, load_model, train_cbow
from .lexicon import (
    DEFAULT_BINOMIAL_PAIRS,
    DEFAULT_GENERICS_PAIRS,
    GenericsPairTable,
    Lexicon,
    association_anchor_lexicons,
    builtin_classifier_lexicons,
    builtin_gender_lexicons,
    builtin_gender_noun_lexicons,
    expand,
    load_inquirer,
    load_lexicon,
    oov_words,
)

try:
    TOOL_VERSION = pkg_version("biaslens")
except PackageNotFoundError:  # running from a source tree
    TOOL_VERSION = "0.0.0+src"

METRIC_NAMES = ("presence", "modifier_ratio", "premodified", "generics", "binomials", "association")

REPORT_FILENAME = "report.json"

_DEFAULT_METRIC_PARAMS: dict[str, dict[str, Any]] = {
    "presence": {"lexicons": "pronouns"},
    "modifier_ratio": {},
    "premodified": {"min_freq": 1},
    "generics": {},
    "binomials": {"window": 3},
    "association": {"top_k": 20, "anchor_mode": "singleton", "themes": [], "model_scope": "per-slice"},
}


@dataclass
class AuditConfig:
    """Declarative audit description with every default materialized."""

    sources: list[dict[str, Any]]
    slices: dict[str, Any] = field(default_factory=lambda: {"mode": "all"})
    tokenizer: dict[str, Any] = field(default_factory=lambda: {"lowercase": True})
    train: dict[str, Any] = field(default_factory=dict)
    model_paths: dict[str, str] = field(default_factory=dict)
    lexicons: dict[str, Any] = field(default_factory=dict)
    metrics: dict[str, Any] = field(default_factory=dict)
    seed: int = 1
    threads: int = 1
    strict: bool = True
    output_dir: Optional[str] = None
    base_dir: Path = field(default_factory=Path)

    @classmethod
    def from_dict(cls, raw: dict[str, Any], base_dir: str | Path = ".") -> "AuditConfig":
        known = {f for f in cls.__dataclass_fields__ if f != "base_dir"}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**{k: v for k, v in raw.items() if k in known}, base_dir=Path(base_dir))
        cfg._materialize()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "AuditConfig":
        path = Path(path)
        with path.open("r", encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls.from_dict(raw, base_dir=path.parent)

    def _materialize(self) -> None:
        if not self.metrics:
            self.metrics = {name: True for name in METRIC_NAMES}
        resolved_metrics: dict[str, Any] = {}
        for name, value in self.metrics.items():
            if value is False or value is None:
                continue
            params = dict(_DEFAULT_METRIC_PARAMS.get(name, {}))
            if isinstance(value, dict):
                params.update(value)
            resolved_metrics[name] = params
        self.metrics = resolved_metrics

        # merge defaults without constructing TrainConfig: bad values must
        # surface as validation problems, not exceptions at parse time
        defaults = {name: f.default for name, f in TrainConfig.__dataclass_fields__.items()}
        defaults["seed"] = self.seed
        self.train = {**defaults, **self.train}

        self.tokenizer = {"lowercase": bool(self.tokenizer.get("lowercase", True))}

        lex = dict(self.lexicons)
        lex.setdefault("inquirer", None)  # {"path":..., "categories": [...]}
        lex.setdefault("themes", {})  # name -> lexicon TSV path
        lex.setdefault("classifiers", {})  # category -> TSV path, overriding builtins
        lex.setdefault("expansion", {})
        lex["expansion"] = {
            "per_word_k": int(lex["expansion"].get("per_word_k", 0)),
            "min_similarity": float(lex["expansion"].get("min_similarity", 0.4)),
        }
        self.lexicons = lex

        self.slices = dict(self.slices) if self.slices else {"mode": "all"}
        self.slices.setdefault("mode", "all")

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def tokenize_config(self) -> TokenizeConfig:
        return TokenizeConfig(lowercase=self.tokenizer["lowercase"])

    def train_config(self) -> TrainConfig:
        return TrainConfig(**self.train)

    def to_dict(self) -> dict[str, Any]:
        """The resolved config as echoed into the report (no output_dir)."""
        return {
            "sources": self.sources,
            "slices": self.slices,
            "tokenizer": self.tokenizer,
            "train": self.train,
            "model_paths": self.model_paths,
            "lexicons": self.lexicons,
            "metrics": self.metrics,
            "seed": self.seed,
            "threads": self.threads,
            "strict": self.strict,
        }


@dataclass
class AuditReport:
    """Structured output of one audit run; serializes losslessly to JSON."""

    tool_version: str
    config: dict[str, Any]
    slices: list[dict[str, Any]]
    warnings: list[str]
    timings: dict[str, float]

    def to_dict(self) -> dict[str, Any]:
        return {
            "tool_version": self.tool_version,
            "config": self.config,
            "slices": self.slices,
            "warnings": self.warnings,
            "timings": self.timings,
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "AuditReport":
        return cls(
            tool_version=raw["tool_version"],
            config=raw["config"],
            slices=raw["slices"],
            warnings=raw["warnings"],
            timings=raw.get("timings", {}),
        )

    def slice_errors(self) -> dict[str, dict[str, str]]:
        return {s["label"]: s["errors"] for s in self.slices if s["errors"]}


def canonical_report_json(report: AuditReport | dict[str, Any], drop_timings: bool = False) -> str:
    """Canonical serialization: sorted keys, two-space indent, trailing newline.

    drop_timings removes the only run-to-run varying section, for golden
    comparisons.
    """
    data = report.to_dict() if isinstance(report, AuditReport) else dict(report)
    if drop_timings:
        data = {k: v for k, v in data.items() if k != "timings"}
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def validate(config: AuditConfig) -> list[str]:
    """Check a config without touching the filesystem for writes.

    Returns a list of problems; empty means valid.
    """
    problems: list[str] = []
    if not config.sources:
        problems.append("config has no corpus sources")
    for i, src in enumerate(config.sources):
        kind = src.get("kind")
        if kind not in ("jsonl", "text-dir"):
            problems.append(f"sources[{i}]: unknown kind {kind!r} (expected jsonl or text-dir)")
            continue
        path = src.get("path")
        if not path:
            problems.append(f"sources[{i}]: missing path")
        elif not config.resolve(path).exists():
            problems.append(f"sources[{i}]: path does not exist: {path}")
    if not config.metrics:
        problems.append("config selects no metrics")
    for name in config.metrics:
        if name not in METRIC_NAMES:
            problems.append(f"unknown metric {name!r}; expected one of {METRIC_NAMES}")
    premod = config.metrics.get("premodified")
    if premod and premod.get("min_freq", 1) < 1:
        problems.append("premodified.min_freq must be >= 1")
    binom = config.metrics.get("binomials")
    if binom and binom.get("window", 3) < 1:
        problems.append("binomials.window must be >= 1")
    assoc = config.metrics.get("association")
    if assoc:
        if assoc.get("top_k", 20) < 1:
            problems.append("association.top_k must be >= 1")
        if assoc.get("anchor_mode", "singleton") not in ("singleton", "nouns", "pronouns"):
            problems.append(f"association.anchor_mode {assoc.get('anchor_mode')!r} unknown")
        if assoc.get("model_scope", "per-slice") not in ("per-slice", "global"):
            problems.append(f"association.model_scope {assoc.get('model_scope')!r} unknown")
    try:
        config.train_config()
    except (TypeError, ValueError) as exc:
        problems.append(f"train config: {exc}")
    if config.slices.get("mode") not in ("all", "by_year", "explicit"):
        problems.append(f"slices.mode {config.slices.get('mode')!r} unknown")
    if config.slices.get("mode") == "explicit" and not config.slices.get("slices"):
        problems.append("slices.mode=explicit requires a slices.slices list")
    inquirer = config.lexicons.get("inquirer")
    if inquirer:
        if not inquirer.get("path"):
            problems.append("lexicons.inquirer: missing path")
        elif not config.resolve(inquirer["path"]).exists():
            problems.append(f"lexicons.inquirer: path does not exist: {inquirer['path']}")
        if not inquirer.get("categories"):
            problems.append("lexicons.inquirer: missing categories")
    for name, path in config.lexicons.get("themes", {}).items():
        if not config.resolve(path).exists():
            problems.append(f"lexicons.themes[{name}]: path does not exist: {path}")
    for name, path in config.lexicons.get("classifiers", {}).items():
        if not config.resolve(path).exists():
            problems.append(f"lexicons.classifiers[{name}]: path does not exist: {path}")
    for label, path in config.model_paths.items():
        if not config.resolve(path).exists():
            problems.append(f"model_paths[{label}]: path does not exist: {path}")
    if config.threads < 1:
        problems.append("threads must be >= 1")
    return problems


def _load_corpus(config: AuditConfig, warnings: list[str]) -> Corpus:
    stats = LoadStats()
    docs = []
    for src in config.sources:
        path = config.resolve(src["path"])
        if src["kind"] == "jsonl":
            docs.extend(load_jsonl(path, strict=config.strict, stats=stats))
        else:
            docs.extend(
                load_plaintext_dir(
                    path,
                    metadata_rule=src.get("filename_pattern"),
                    source=src.get("source", ""),
                    strict=config.strict,
                    stats=stats,
                )
            )
    if stats.skipped:
        warnings.append(f"lenient load skipped {stats.skipped} records")
    return build_corpus(docs, config.tokenize_config())


def _build_slices(config: AuditConfig, corpus: Corpus, warnings: list[str]) -> list[CorpusView]:
    mode = config.slices["mode"]
    if mode == "all":
        return [corpus.view("all")]
    if mode == "by_year":
        undated = sum(1 for meta, _ in corpus.documents if meta.year is None)
        if undated:
            warnings.append(f"{undated} undated documents excluded from by-year slices")
        return [
            slice_corpus(corpus, year_from=y, year_to=y, label=str(y))
            for y in corpus.years()
        ]
    views = []
    for spec in config.slices["slices"]:
        views.append(
            slice_corpus(
                corpus,
                year_from=spec.get("year_from"),
                year_to=spec.get("year_to"),
                source=spec.get("source"),
                label=spec.get("label"),
            )
        )
    return views


def _load_themes(config: AuditConfig) -> dict[str, Lexicon]:
    themes: dict[str, Lexicon] = {}
    inquirer = config.lexicons.get("inquirer")
    if inquirer:
        for lex in load_inquirer(
            config.resolve(inquirer["path"]), inquirer["categories"], strict=config.strict
        ):
            themes[lex.name] = lex
    for name, path in sorted(config.lexicons.get("themes", {}).items()):
        themes[name] = load_lexicon(config.resolve(path), name=name)
    return themes


def _anchor_lexicons(mode: str) -> tuple[Lexicon, Lexicon]:
    if mode == "singleton":
        return association_anchor_lexicons()
    if mode == "nouns":
        return builtin_gender_noun_lexicons()
    return builtin_gender_lexicons()


def _slice_model(config: AuditConfig, view: CorpusView) -> EmbeddingModel:
    path = config.model_paths.get(view.label)
    if path:
        return load_model(config.resolve(path))
    return train_cbow(view.materialize(), config.train_config(), threads=config.threads)


def _global_model(config: AuditConfig, corpus: Corpus) -> Optional[EmbeddingModel]:
    """One model shared by every slice, when association.model_scope is global."""
    assoc = config.metrics.get("association")
    if not assoc or assoc.get("model_scope", "per-slice") != "global":
        return None
    path = config.model_paths.get("global")
    if path:
        return load_model(config.resolve(path))
    return train_cbow(corpus, config.train_config(), threads=config.threads)


def _run_slice(
    config: AuditConfig,
    view: CorpusView,
    themes: dict[str, Lexicon],
    warnings: list[str],
    shared_model: Optional[EmbeddingModel] = None,
    shared_model_error: Optional[str] = None,
) -> dict[str, Any]:
    results: dict[str, Any] = {}
    errors: dict[str, str] = {}
    model_info: Optional[dict[str, Any]] = None
    selected = config.metrics

    male_pron, female_pron = builtin_gender_lexicons()
    male_noun, female_noun = builtin_gender_noun_lexicons()

    if "presence" in selected:
        try:
            which = selected["presence"].get("lexicons", "pronouns")
            if which == "nouns":
                male_lex, female_lex = male_noun, female_noun
            elif which == "pronouns+nouns":
                male_lex = Lexicon.from_words("male", "gender-male", male_pron.words | male_noun.words)
                female_lex = Lexicon.from_words("female", "gender-female", female_pron.words | female_noun.words)
            else:
                male_lex, female_lex = male_pron, female_pron
            res = metrics_mod.presence(view, male_lex, female_lex)
            if res.female_proportion is None:
                warnings.append(f"slice {view.label}: presence undefined (no gendered tokens)")
            results["presence"] = res.to_dict()
        except Exception as exc:
            errors["presence"] = str(exc)

    if "modifier_ratio" in selected:
        try:
            counts = metrics_mod.token_counts(view, ("female", "male"))
            share = metrics_mod.modifier_ratio(view)
            if share is None:
                warnings.append(f"slice {view.label}: modifier_ratio undefined (no modifier tokens)")
            results["modifier_ratio"] = {
                "label": view.label,
                "male_count": counts["male"],
                "female_count": counts["female"],
                "female_share": share,
            }
        except Exception as exc:
            errors["modifier_ratio"] = str(exc)

    if "premodified" in selected:
        try:
            classifiers = builtin_classifier_lexicons()
            for category, path in config.lexicons.get("classifiers", {}).items():
                classifiers[category] = load_lexicon(config.resolve(path), name=category)
            results["premodified"] = metrics_mod.premodified(
                view,
                classifiers=classifiers,
                min_freq=selected["premodified"].get("min_freq", 1),
            ).to_dict()
        except Exception as exc:
            errors["premodified"] = str(exc)

    if "generics" in selected:
        try:
            pairs = selected["generics"].get("pairs")
            table = GenericsPairTable(pairs=tuple(tuple(p) for p in pairs)) if pairs else DEFAULT_GENERICS_PAIRS
            results["generics"] = metrics_mod.generics_trend(view, table).to_dict()
        except Exception as exc:
            errors["generics"] = str(exc)

    if "binomials" in selected:
        try:
            pairs = selected["binomials"].get("pairs")
            pair_list = tuple(tuple(p) for p in pairs) if pairs else DEFAULT_BINOMIAL_PAIRS
            results["binomials"] = metrics_mod.binomial_order(
                view, pair_list, window=selected["binomials"].get("window", 3)
            ).to_dict()
        except Exception as exc:
            errors["binomials"] = str(exc)

    if "association" in selected:
        try:
            if shared_model_error is not None:
                raise ValueError(f"global model unavailable: {shared_model_error}")
            params = selected["association"]
            model = shared_model if shared_model is not None else _slice_model(config, view)
            model_info = {
                "fingerprint": model.fingerprint(),
                "config": model.config.to_dict(),
                "vocab_size": len(model.vocab),
            }
            male_anchor, female_anchor = _anchor_lexicons(params.get("anchor_mode", "singleton"))
            wanted = params.get("themes") or sorted(themes)
            expansion = config.lexicons["expansion"]
            assoc_results: dict[str, Any] = {}
            for theme_name in wanted:
                if theme_name not in themes:
                    raise ValueError(f"association theme {theme_name!r} has no lexicon configured")
                theme = themes[theme_name]
                missing = oov_words(theme, model)
                if missing:
                    warnings.append(
                        f"slice {view.label}: {len(missing)} {theme.name!r} words not in vocabulary"
                    )
                if expansion["per_word_k"] > 0:
                    theme = expand(theme, model, expansion["per_word_k"], expansion["min_similarity"])
                assoc_results[theme_name] = metrics_mod.paired_association(
                    model, male_anchor, female_anchor, theme, params.get("top_k", 20)
                ).to_dict()
            results["association"] = assoc_results
        except Exception as exc:
            errors["association"] = str(exc)

    return {
        "label": view.label,
        "documents": len(view),
        "tokens": view.token_count(),
        "results": results,
        "errors": errors,
        "model": model_info,
    }


def run_audit(config: AuditConfig, output_dir: str | Path | None = None) -> AuditReport:
    """Execute the audit and write report.json plus plot CSVs.

    Slices run independently: a failing metric is recorded in the slice's
    errors and the rest continue.  Config problems abort before any output.
    """
    problems = validate(config)
    if problems:
        raise ValueError("invalid config: " + "; ".join(problems))
    out_dir = Path(output_dir) if output_dir is not None else (
        config.resolve(config.output_dir) if config.output_dir else None
    )
    if out_dir is None:
        raise ValueError("no output directory given (config output_dir or output_dir argument)")

    t_start = time.perf_counter()
    warnings: list[str] = []
    timings: dict[str, float] = {}

    corpus = _load_corpus(config, warnings)
    themes = _load_themes(config)
    views = _build_slices(config, corpus, warnings)
    shared_model = None
    shared_model_error = None
    try:
        shared_model = _global_model(config, corpus)
    except Exception as exc:
        shared_model_error = str(exc)

    slices = []
    for view in views:
        t_slice = time.perf_counter()
        slices.append(_run_slice(config, view, themes, warnings, shared_model, shared_model_error))
        timings[f"slice:{view.label}"] = round(time.perf_counter() - t_slice, 6)
    timings["total"] = round(time.perf_counter() - t_start, 6)

    report = AuditReport(
        tool_version=TOOL_VERSION,
        config=config.to_dict(),
        slices=slices,
        warnings=warnings,
        timings=timings,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / REPORT_FILENAME).write_text(canonical_report_json(report), encoding="utf-8")
    emit_plot_data(report, out_dir)
    return report


def _csv_value(value: Any) -> Any:
    return "" if value is None else value


def emit_plot_data(report: AuditReport, out_dir: str | Path) -> list[Path]:
    """Write one CSV per figure analog; returns the written paths.

    Overwriting is idempotent (same bytes for the same report).  The
    directory is checked for writability before any file is opened.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise PermissionError(f"output directory not writable: {out_dir}")

    tables: dict[str, tuple[list[str], list[list[Any]]]] = {}

    def add(name: str, header: list[str], row: list[Any]) -> None:
        tables.setdefault(name, (header, []))[1].append([_csv_value(v) for v in row])

    for sl in report.slices:
        label = sl["label"]
        results = sl["results"]
        if "presence" in results:
            r = results["presence"]
            add("presence.csv",
                ["slice", "male_count", "female_count", "female_proportion"],
                [label, r["male_count"], r["female_count"], r["female_proportion"]])
        if "modifier_ratio" in results:
            r = results["modifier_ratio"]
            add("modifier_ratio.csv",
                ["slice", "male_count", "female_count", "female_share"],
                [label, r["male_count"], r["female_count"], r["female_share"]])
        if "generics" in results:
            for p in results["generics"]["pairs"]:
                add("generics.csv",
                    ["slice", "marked", "neutral", "marked_count", "neutral_count", "neutral_share"],
                    [label, p["marked"], p["neutral"], p["marked_count"], p["neutral_count"], p["neutral_share"]])
        if "binomials" in results:
            r = results["binomials"]
            for p in r["pairs"]:
                add("binomials.csv",
                    ["slice", "male_term", "female_term", "male_first_count", "female_first_count", "male_first_share"],
                    [label, p["male_term"], p["female_term"], p["male_first_count"], p["female_first_count"], p["male_first_share"]])
            add("binomials.csv",
                ["slice", "male_term", "female_term", "male_first_count", "female_first_count", "male_first_share"],
                [label, "(all)", "(all)", r["male_first_total"], r["female_first_total"], r["aggregate_male_first_share"]])
        if "premodified" in results:
            r = results["premodified"]
            equal = set(r["equally_premodified"])
            for gender in sorted(r["entries"]):
                for e in r["entries"][gender]:
                    add("premod.csv",
                        ["slice", "gender", "head", "frequency", "category", "equally_premodified"],
                        [label, gender, e["head"], e["frequency"], e["category"], e["head"] in equal])
        if "association" in results:
            for theme_name in sorted(results["association"]):
                r = results["association"][theme_name]
                safe = "".join(c if c.isalnum() or c in "-_" else "-" for c in theme_name)
                for gender in ("male", "female"):
                    g = r[gender]
                    for rank, (term, sim) in enumerate(g["top_terms"], start=1):
                        add(f"association_{safe}.csv",
                            ["slice", "theme", "gender", "rank", "term", "similarity",
                             "mean_top_k", "lexicon_mean"],
                            [label, theme_name, gender, rank, term, sim,
                             g["mean_similarity"], g["lexicon_mean"]])

    written = []
    for name in sorted(tables):
        header, rows = tables[name]
        path = out_dir / name
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        written.append(path)
    return written
