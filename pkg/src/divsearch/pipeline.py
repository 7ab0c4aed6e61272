"""Experiment orchestration: retrieve, generate, score, diversify, evaluate, tune.

A declarative config (flat TOML file plus overrides) drives the full run.
Every artifact is written deterministically and hashed into a manifest, so
re-running an identical config reproduces byte-identical outputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .diversify import ProbMatrix, XquadConfig, normalize, pm2, xquad
from .errors import DataError, StageError
from .evaldiv import (
    METRICS,
    DiversityQrels,
    EvalResult,
    MetricConfig,
    alpha_ndcg,
    evaluate_run,
    load_qrels,
    write_pertopic_tsv,
    write_summary_json,
)
from .intentgen import CountLM, IntentSet, generate, read_intents_jsonl, write_intents_jsonl
from .protocol import ExternalGenerator, generate_external
from .querylog import (
    QueryCollection,
    bucket_labels,
    build_prefix_tree,
    frequency,
    load_queries,
    load_tree,
    stratify,
)
from .scoring import (
    Bm25Scorer,
    Corpus,
    DphScorer,
    MaxPassageScorer,
    ScoreMatrix,
    build_matrix,
    read_matrices_tsv,
    retrieve,
    write_matrices_tsv,
    write_run,
)
from .tokens import tokenize

INTENT_SOURCES = ("count-lm", "external", "file")
SCORERS = ("dph", "bm25", "ingest")
AGGREGATORS = ("xquad", "pm2")

_PATH_FIELDS = ("corpus", "topics", "qrels", "tree", "queries", "intents_file",
                "scores_file", "out_dir")


@dataclass
class ExperimentConfig:
    corpus: str = ""
    topics: str = ""
    qrels: str = ""
    intent_source: str = "count-lm"
    tree: str | None = None  # prefix-tree JSON (count-lm source)
    queries: str | None = None  # raw query log; tree is built from it if no tree given
    intents_file: str | None = None
    external_cmd: str | None = None
    scorer: str = "dph"
    scores_file: str | None = None
    aggregator: str = "xquad"
    n_intents: int = 5
    beam: int = 30
    lam: float = 0.5
    pool_depth: int = 100
    depth: int | None = None  # aggregation depth; None re-ranks the whole pool
    use_full_text: bool = True
    max_passage: bool = False
    window: int = 150
    stride: int = 75
    alpha: float = 0.5
    beta: float = 0.5
    cutoff: int = 20
    seed: int = 0
    tag: str = "divsearch"
    out_dir: str = "out"

    @classmethod
    def from_mapping(cls, data: dict, base_dir: str | None = None) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise DataError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**data)
        if base_dir:
            for name in _PATH_FIELDS:
                value = getattr(cfg, name)
                if value and not Path(value).is_absolute():
                    setattr(cfg, name, str(Path(base_dir) / value))
        return cfg

    @classmethod
    def from_file(cls, path: str, overrides: dict | None = None) -> "ExperimentConfig":
        with open(path, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise DataError(f"{path}: invalid config: {exc}") from exc
        cfg = cls.from_mapping(data, base_dir=str(Path(path).parent))
        if overrides:
            for key, value in overrides.items():
                if not hasattr(cfg, key):
                    raise DataError(f"unknown config key: {key}")
                setattr(cfg, key, value)
        return cfg

    def validate(self) -> None:
        if self.intent_source not in INTENT_SOURCES:
            raise DataError(f"intent_source must be one of {INTENT_SOURCES}")
        if self.scorer not in SCORERS:
            raise DataError(f"scorer must be one of {SCORERS}")
        if self.aggregator not in AGGREGATORS:
            raise DataError(f"aggregator must be one of {AGGREGATORS}")
        if not 1 <= self.n_intents <= 20:
            raise DataError("n_intents must be in [1, 20]")
        if not 0.0 <= self.lam <= 1.0:
            raise DataError("lam must be in [0, 1]")
        if self.pool_depth < 1:
            raise DataError("pool_depth must be >= 1")
        for name in ("corpus", "topics", "qrels"):
            value = getattr(self, name)
            if not value:
                raise DataError(f"config field {name!r} is required")
            if not Path(value).exists():
                raise DataError(f"{name} path does not exist: {value}")
        if self.intent_source == "count-lm" and self.scorer != "ingest":
            if not (self.tree or self.queries):
                raise DataError("count-lm source needs 'tree' or 'queries'")
        if self.intent_source == "file" and not self.intents_file:
            raise DataError("file source needs 'intents_file'")
        if self.intent_source == "external" and not self.external_cmd:
            raise DataError("external source needs 'external_cmd'")
        if self.scorer == "ingest" and not self.scores_file:
            raise DataError("ingest scorer needs 'scores_file'")


def read_topics(path: str) -> list[tuple[str, str]]:
    """TSV `qid<TAB>query`, one topic per line, in file order."""
    topics: list[tuple[str, str]] = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
                raise DataError(f"{path}:{lineno}: expected 'qid<TAB>query'")
            qid, query = parts[0].strip(), parts[1].strip()
            if qid in seen:
                raise DataError(f"{path}:{lineno}: duplicate qid {qid!r}")
            seen.add(qid)
            topics.append((qid, query))
    if not topics:
        raise DataError(f"{path}: no topics")
    return topics


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _build_scorer(config: ExperimentConfig, corpus: Corpus):
    base = DphScorer(corpus.stats) if config.scorer == "dph" else Bm25Scorer(corpus.stats)
    if config.max_passage:
        return MaxPassageScorer(base, window=config.window, stride=config.stride)
    return base


def _slice_probs(probs: ProbMatrix, n: int) -> ProbMatrix:
    labels = ["q0"] + probs.intent_labels[:n]
    return ProbMatrix(
        qid=probs.qid,
        docnos=list(probs.docnos),
        labels=labels,
        columns={label: probs.columns[label] for label in labels},
    )


def _aggregate(
    probs: ProbMatrix, aggregator: str, lam: float, depth: int | None
) -> list[str]:
    if not probs.intent_labels:
        limit = len(probs.docnos) if depth is None else min(depth, len(probs.docnos))
        return list(probs.docnos[:limit])
    if aggregator == "xquad":
        return xquad(probs, XquadConfig(lam=lam), depth=depth)
    return pm2(probs, lam=lam, depth=depth)


class _IntentProvider:
    """Resolves the configured intent source to per-topic IntentSets."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self._model = None
        self._file_sets = None
        self._generator = None
        if config.intent_source == "count-lm":
            tree = (
                load_tree(config.tree)
                if config.tree
                else build_prefix_tree(load_queries(config.queries))
            )
            self._model = CountLM(tree)
        elif config.intent_source == "file":
            self._file_sets = read_intents_jsonl(config.intents_file)
        else:
            self._generator = ExternalGenerator.from_command(config.external_cmd)

    def intents_for(self, qid: str, query: str) -> IntentSet:
        n = self.config.n_intents
        if self._model is not None:
            return generate(self._model, query, n=n, beam=self.config.beam)
        if self._file_sets is not None:
            iset = self._file_sets.get(qid, IntentSet(query=query, intents=[]))
            return IntentSet(query=query, intents=iset.intents[:n])
        return generate_external(self._generator, query, n=n, beam=self.config.beam)

    def close(self) -> None:
        if self._generator is not None:
            self._generator.close()


@dataclass
class RunOutcome:
    out_dir: str
    run_path: str
    metrics_path: str
    pertopic_path: str
    manifest_path: str
    intents_path: str | None
    matrix_path: str | None
    result: EvalResult
    manifest: dict


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def run(config: ExperimentConfig) -> RunOutcome:
    """Execute the full pipeline for one config; see the module docstring."""
    _stage("validate-config", config.validate)
    corpus = _stage("load-corpus", Corpus.from_jsonl, config.corpus)
    topics = _stage("load-topics", read_topics, config.topics)
    qrels = _stage("load-qrels", load_qrels, config.qrels)

    ingested: dict[str, ScoreMatrix] = {}
    provider = None
    if config.scorer == "ingest":
        matrices = _stage(
            "ingest-scores",
            read_matrices_tsv,
            config.scores_file,
            {qid for qid, _ in topics},
        )
        ingested = {m.qid: m for m in matrices}
    else:
        provider = _stage("init-intents", _IntentProvider, config)

    rankings: list[tuple[str, list[str]]] = []
    intent_sets: list[tuple[str, IntentSet]] = []
    matrices_out: list[ScoreMatrix] = []
    try:
        scorer = None if config.scorer == "ingest" else _build_scorer(config, corpus)
        for qid, query in topics:
            if config.scorer == "ingest":
                matrix = ingested.get(qid)
                if matrix is None:
                    raise StageError("ingest-scores", DataError(f"no scores for qid {qid!r}"))
                matrix = ScoreMatrix(
                    qid=matrix.qid,
                    docnos=matrix.docnos,
                    labels=matrix.labels[: config.n_intents + 1],
                    columns={
                        label: matrix.columns[label]
                        for label in matrix.labels[: config.n_intents + 1]
                    },
                )
            else:
                pool = _stage(
                    "retrieve", retrieve, corpus, tokenize(query), scorer, qid,
                    config.pool_depth,
                )
                iset = _stage("generate-intents", provider.intents_for, qid, query)
                intent_sets.append((qid, iset))
                matrix = _stage(
                    "score", build_matrix, pool, query, iset, scorer, corpus,
                    config.use_full_text,
                )
            matrices_out.append(matrix)
            probs = _stage("normalize", normalize, matrix)
            ranking = _stage(
                "diversify", _aggregate, probs, config.aggregator, config.lam,
                config.depth,
            )
            rankings.append((qid, ranking))
    finally:
        if provider is not None:
            provider.close()

    result = _stage(
        "evaluate",
        evaluate_run,
        dict(rankings),
        qrels,
        MetricConfig(alpha=config.alpha, beta=config.beta, cutoff=config.cutoff),
    )

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run_path = out_dir / "run.txt"
    metrics_path = out_dir / "metrics.json"
    pertopic_path = out_dir / "pertopic.tsv"
    matrix_path = out_dir / "scores.tsv"
    manifest_path = out_dir / "manifest.json"
    intents_path = out_dir / "intents.jsonl" if intent_sets else None

    _stage("write-run", write_run, str(run_path), rankings, config.tag)
    _stage("write-metrics", write_summary_json, result, str(metrics_path))
    _stage("write-pertopic", write_pertopic_tsv, result, str(pertopic_path))
    _stage("write-scores", write_matrices_tsv, matrices_out, str(matrix_path))
    if intents_path:
        _stage("write-intents", write_intents_jsonl, intent_sets, str(intents_path))

    artifacts = {"run": str(run_path), "metrics": str(metrics_path),
                 "pertopic": str(pertopic_path), "scores": str(matrix_path)}
    if intents_path:
        artifacts["intents"] = str(intents_path)
    manifest = {
        "toolkit_version": __version__,
        "seed": config.seed,
        "config": asdict(config),
        "artifacts": {
            name: {"path": path, "sha256": _sha256(path)}
            for name, path in sorted(artifacts.items())
        },
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return RunOutcome(
        out_dir=str(out_dir),
        run_path=str(run_path),
        metrics_path=str(metrics_path),
        pertopic_path=str(pertopic_path),
        manifest_path=str(manifest_path),
        intents_path=str(intents_path) if intents_path else None,
        matrix_path=str(matrix_path),
        result=result,
        manifest=manifest,
    )


# --- grid tuning ------------------------------------------------------------


@dataclass
class CollectionSpec:
    name: str
    topics: str
    qrels: str


@dataclass
class TuningProtocol:
    collections: list[CollectionSpec]
    n_values: list[int] = field(default_factory=lambda: list(range(1, 21)))
    lam_values: list[float] = field(
        default_factory=lambda: [round(i / 10, 1) for i in range(11)]
    )


@dataclass
class TuneResult:
    collection: str
    n: int
    lam: float
    train_objective: float  # mean alpha-nDCG over the tuning collections
    heldout_means: dict[str, float]


@dataclass
class _PreparedTopic:
    qid: str
    probs: ProbMatrix  # with max-n intent columns


def _prepare_collection(
    spec: CollectionSpec, config: ExperimentConfig, corpus: Corpus, provider, scorer,
    max_n: int,
) -> tuple[list[_PreparedTopic], DiversityQrels]:
    topics = read_topics(spec.topics)
    qrels = load_qrels(spec.qrels)
    prepared = []
    for qid, query in topics:
        pool = retrieve(corpus, tokenize(query), scorer, qid, config.pool_depth)
        iset = provider.intents_for(qid, query)
        iset = IntentSet(query=iset.query, intents=iset.intents[:max_n])
        matrix = build_matrix(pool, query, iset, scorer, corpus, config.use_full_text)
        prepared.append(_PreparedTopic(qid=qid, probs=normalize(matrix)))
    return prepared, qrels


def grid_tune(protocol: TuningProtocol, base: ExperimentConfig) -> list[TuneResult]:
    """Leave-one-collection-out grid search maximizing mean alpha-nDCG@cutoff.

    Ties prefer the smaller n, then the smaller lam (ascending iteration with
    strictly-greater updates).
    """
    if len(protocol.collections) < 2:
        raise DataError("tuning needs at least 2 collections")
    if not protocol.n_values or not protocol.lam_values:
        raise DataError("empty grid")
    for n in protocol.n_values:
        if not 1 <= n <= 20:
            raise DataError("grid n values must be in [1, 20]")
    for lam in protocol.lam_values:
        if not 0.0 <= lam <= 1.0:
            raise DataError("grid lam values must be in [0, 1]")
    if base.scorer == "ingest":
        raise DataError("tuning is not supported with the ingest scorer")

    max_n = max(protocol.n_values)
    cfg = MetricConfig(alpha=base.alpha, beta=base.beta, cutoff=base.cutoff)
    corpus = Corpus.from_jsonl(base.corpus)
    scorer = _build_scorer(base, corpus)
    provider = _IntentProvider(replace(base, n_intents=max_n))
    try:
        prepared = {
            spec.name: _prepare_collection(spec, base, corpus, provider, scorer, max_n)
            for spec in protocol.collections
        }
    finally:
        provider.close()

    results = []
    for heldout in protocol.collections:
        train = [c for c in protocol.collections if c.name != heldout.name]
        best: tuple[int, float] | None = None
        best_score = None
        for n in protocol.n_values:
            for lam in protocol.lam_values:
                scores = []
                for spec in train:
                    topics, qrels = prepared[spec.name]
                    for item in topics:
                        tq = qrels.topics.get(item.qid)
                        if tq is None:
                            continue
                        ranking = _aggregate(
                            _slice_probs(item.probs, n), base.aggregator, lam,
                            base.depth,
                        )
                        scores.append(alpha_ndcg(ranking, tq, cfg))
                objective = sum(scores) / len(scores) if scores else 0.0
                if best_score is None or objective > best_score:
                    best_score = objective
                    best = (n, lam)
        n_best, lam_best = best
        topics, qrels = prepared[heldout.name]
        rankings = {
            item.qid: _aggregate(
                _slice_probs(item.probs, n_best), base.aggregator, lam_best, base.depth
            )
            for item in topics
        }
        heldout_result = evaluate_run(rankings, qrels, cfg)
        results.append(
            TuneResult(
                collection=heldout.name,
                n=n_best,
                lam=lam_best,
                train_objective=best_score,
                heldout_means=heldout_result.means,
            )
        )
    return results


# --- stratified reporting ---------------------------------------------------


def stratify_topics(
    topics: Sequence[tuple[str, str]],
    collection: QueryCollection,
    boundaries: Sequence[int] = (1, 37),
) -> dict[str, str]:
    """Bucket each topic by the frequency of its query text in the collection."""
    freqs = {qid: frequency(collection, query) for qid, query in topics}
    return stratify(freqs, boundaries)


def stratified_report(
    per_topic: dict[str, dict[str, float]],
    buckets: dict[str, str],
    boundaries: Sequence[int] = (1, 37),
) -> dict:
    """Per-bucket metric means plus a counts row; every topic must have a bucket."""
    missing = sorted(t for t in per_topic if t not in buckets)
    if missing:
        raise DataError(f"topics without a bucket: {', '.join(missing)}")
    order = bucket_labels(boundaries)
    rows: dict[str, dict] = {
        label: {"count": 0, **{m: 0.0 for m in METRICS}} for label in order
    }
    for topic, values in per_topic.items():
        label = buckets[topic]
        if label not in rows:
            raise DataError(f"unknown bucket label {label!r} for topic {topic!r}")
        row = rows[label]
        row["count"] += 1
        for metric in METRICS:
            row[metric] += values.get(metric, 0.0)
    for row in rows.values():
        if row["count"]:
            for metric in METRICS:
                row[metric] /= row["count"]
    return {"order": order, "buckets": rows, "total_topics": len(per_topic)}


def write_stratified_tsv(report: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bucket\tcount\t" + "\t".join(METRICS) + "\n")
        for label in report["order"]:
            row = report["buckets"][label]
            fh.write(
                f"{label}\t{row['count']}\t"
                + "\t".join(f"{row[m]:.6f}" for m in METRICS)
                + "\n"
            )
