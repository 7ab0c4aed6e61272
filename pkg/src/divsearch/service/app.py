"""FastAPI service wrapping the diversification toolkit.

Every endpoint is a thin adapter over the core package; file paths in
requests are resolved on the server's filesystem. Error responses carry a
"kind" field: "usage" (bad parameters), "data" (malformed input files), or
"internal".
"""

from __future__ import annotations

import json

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..diversify import XquadConfig, normalize, pm2, xquad
from ..errors import DataError, StageError
from ..evaldiv import (
    MetricConfig,
    evaluate_run,
    load_qrels,
    read_pertopic_tsv,
    write_pertopic_tsv,
    write_summary_json,
)
from ..intentgen import CountLM, IntentSet, generate, read_intents_jsonl, write_intents_jsonl
from ..pipeline import (
    CollectionSpec,
    ExperimentConfig,
    TuningProtocol,
    grid_tune,
    read_topics,
    run as run_pipeline,
    stratified_report,
    stratify_topics,
    write_stratified_tsv,
)
from ..querylog import (
    build_prefix_tree,
    emit_clm_samples,
    emit_dclm_samples,
    load_queries,
    load_tree,
    save_tree,
    write_clm_jsonl,
    write_dclm_jsonl,
)
from ..scoring import (
    Bm25Scorer,
    CandidatePool,
    Corpus,
    DphScorer,
    MaxPassageScorer,
    build_matrix,
    read_matrices_tsv,
    read_run,
    retrieve,
    write_matrices_tsv,
    write_run,
)
from ..tokens import tokenize
from . import schemas


def _scorer(corpus: Corpus, name: str, use_max_passage: bool, window: int, stride: int):
    if name == "dph":
        base = DphScorer(corpus.stats)
    elif name == "bm25":
        base = Bm25Scorer(corpus.stats)
    else:
        raise ValueError(f"unknown scorer {name!r}")
    if use_max_passage:
        return MaxPassageScorer(base, window=window, stride=stride)
    return base


def create_app() -> FastAPI:
    app = FastAPI(title="divsearch", version=__version__)

    @app.exception_handler(DataError)
    async def _data_error(request, exc):
        return JSONResponse(status_code=400, content={"detail": str(exc), "kind": "data"})

    @app.exception_handler(FileNotFoundError)
    async def _missing_file(request, exc):
        return JSONResponse(status_code=400, content={"detail": str(exc), "kind": "data"})

    @app.exception_handler(StageError)
    async def _stage_error(request, exc):
        if isinstance(exc.cause, (DataError, FileNotFoundError)):
            return JSONResponse(status_code=400, content={"detail": str(exc), "kind": "data"})
        return JSONResponse(status_code=500, content={"detail": str(exc), "kind": "internal"})

    @app.exception_handler(ValueError)
    async def _value_error(request, exc):
        return JSONResponse(status_code=400, content={"detail": str(exc), "kind": "usage"})

    @app.get("/healthz", response_model=schemas.HealthResponse)
    def healthz():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/tree/build", response_model=schemas.BuildTreeResponse)
    def tree_build(req: schemas.BuildTreeRequest):
        collection = load_queries(req.queries_path)
        tree = build_prefix_tree(collection)
        save_tree(tree, req.out_path)
        return schemas.BuildTreeResponse(
            total_queries=tree.total_queries,
            root_children=len(tree.root.children),
            out_path=req.out_path,
        )

    @app.post("/samples/dclm", response_model=schemas.SamplesResponse)
    def samples_dclm(req: schemas.DclmSamplesRequest):
        tree = load_tree(req.tree_path)
        count = write_dclm_jsonl(
            emit_dclm_samples(tree, walks=req.walks, seed=req.seed), req.out_path
        )
        return schemas.SamplesResponse(samples=count, out_path=req.out_path)

    @app.post("/samples/clm", response_model=schemas.SamplesResponse)
    def samples_clm(req: schemas.ClmSamplesRequest):
        collection = load_queries(req.queries_path)
        count = write_clm_jsonl(emit_clm_samples(collection), req.out_path)
        return schemas.SamplesResponse(samples=count, out_path=req.out_path)

    @app.post("/intents/generate", response_model=schemas.GenerateResponse)
    def intents_generate(req: schemas.GenerateRequest):
        if (req.query is None) == (req.topics_path is None):
            raise ValueError("provide exactly one of 'query' or 'topics_path'")
        model = CountLM(load_tree(req.tree_path))
        if req.query is not None:
            topics = [("q1", req.query)]
        else:
            topics = read_topics(req.topics_path)
        results = []
        sets = []
        for qid, query in topics:
            iset = generate(model, query, n=req.n, beam=req.beam)
            sets.append((qid, iset))
            results.append(
                schemas.TopicIntents(
                    qid=qid,
                    query=query,
                    intents=[
                        schemas.IntentItem(text=it.full_text, score=it.logprob)
                        for it in iset.intents
                    ],
                )
            )
        if req.out_path:
            write_intents_jsonl(sets, req.out_path)
        return schemas.GenerateResponse(results=results, out_path=req.out_path)

    @app.post("/retrieve", response_model=schemas.RetrieveResponse)
    def retrieve_pools(req: schemas.RetrieveRequest):
        corpus = Corpus.from_jsonl(req.corpus_path)
        scorer = _scorer(corpus, req.scorer, req.max_passage, req.window, req.stride)
        topics = read_topics(req.topics_path)
        rankings = []
        for qid, query in topics:
            pool = retrieve(corpus, tokenize(query), scorer, qid, req.depth)
            rankings.append((qid, pool.docnos))
        write_run(req.out_path, rankings, tag=req.tag)
        return schemas.RetrieveResponse(topics=len(rankings), out_path=req.out_path)

    @app.post("/score", response_model=schemas.ScoreResponse)
    def score(req: schemas.ScoreRequest):
        corpus = Corpus.from_jsonl(req.corpus_path)
        scorer = _scorer(corpus, req.scorer, req.max_passage, req.window, req.stride)
        topics = read_topics(req.topics_path)
        pools = read_run(req.pools_path)
        intent_sets = read_intents_jsonl(req.intents_path)
        matrices = []
        for qid, query in topics:
            docnos = pools.get(qid)
            if docnos is None:
                raise DataError(f"{req.pools_path}: no pool for qid {qid!r}")
            pool = CandidatePool(
                qid=qid,
                entries=[(d, float(len(docnos) - i)) for i, d in enumerate(docnos)],
            )
            iset = intent_sets.get(qid, IntentSet(query=query, intents=[]))
            iset = IntentSet(query=query, intents=iset.intents[: req.n])
            matrices.append(
                build_matrix(pool, query, iset, scorer, corpus, req.use_full_text)
            )
        write_matrices_tsv(matrices, req.out_path)
        return schemas.ScoreResponse(matrices=len(matrices), out_path=req.out_path)

    @app.post("/diversify", response_model=schemas.DiversifyResponse)
    def diversify(req: schemas.DiversifyRequest):
        if req.aggregator not in ("xquad", "pm2"):
            raise ValueError(f"unknown aggregator {req.aggregator!r}")
        matrices = read_matrices_tsv(req.scores_path)
        rankings = []
        traces: dict[str, list] = {}
        for matrix in matrices:
            if req.n is not None:
                intent_labels = [l for l in matrix.labels if l != "q0"][: req.n]
                keep = (["q0"] if "q0" in matrix.labels else []) + intent_labels
                matrix = type(matrix)(
                    qid=matrix.qid,
                    docnos=matrix.docnos,
                    labels=keep,
                    columns={label: matrix.columns[label] for label in keep},
                )
            probs = normalize(matrix)
            trace: list | None = [] if req.trace_path else None
            if not probs.intent_labels:
                ranking = list(probs.docnos)
                if req.depth is not None:
                    ranking = ranking[: req.depth]
            elif req.aggregator == "xquad":
                ranking = xquad(probs, XquadConfig(lam=req.lam), depth=req.depth, trace=trace)
            else:
                ranking = pm2(probs, lam=req.lam, depth=req.depth, trace=trace)
            rankings.append((matrix.qid, ranking))
            if trace is not None:
                traces[matrix.qid] = trace
        write_run(req.out_path, rankings, tag=req.tag)
        if req.trace_path:
            with open(req.trace_path, "w", encoding="utf-8") as fh:
                json.dump(traces, fh, indent=2, sort_keys=True)
                fh.write("\n")
        return schemas.DiversifyResponse(topics=len(rankings), out_path=req.out_path)

    @app.post("/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate(req: schemas.EvaluateRequest):
        run = read_run(req.run_path)
        qrels = load_qrels(req.qrels_path)
        cfg = MetricConfig(alpha=req.alpha, beta=req.beta, cutoff=req.cutoff)
        result = evaluate_run(run, qrels, cfg)
        if req.pertopic_path:
            write_pertopic_tsv(result, req.pertopic_path)
        if req.summary_path:
            write_summary_json(result, req.summary_path)
        return schemas.EvaluateResponse(
            means=result.means,
            per_topic=result.per_topic,
            undefined_topics=result.undefined_topics,
        )

    def _config_from(req) -> ExperimentConfig:
        if req.config_path:
            return ExperimentConfig.from_file(req.config_path, overrides=req.overrides)
        return ExperimentConfig.from_mapping(req.overrides)

    @app.post("/run", response_model=schemas.RunResponse)
    def run_experiment(req: schemas.RunRequest):
        outcome = run_pipeline(_config_from(req))
        return schemas.RunResponse(
            out_dir=outcome.out_dir,
            means=outcome.result.means,
            undefined_topics=outcome.result.undefined_topics,
            artifacts=outcome.manifest["artifacts"],
        )

    @app.post("/tune", response_model=schemas.TuneResponse)
    def tune(req: schemas.TuneRequest):
        base = _config_from(req)
        protocol_kwargs = {
            "collections": [
                CollectionSpec(name=c.name, topics=c.topics, qrels=c.qrels)
                for c in req.collections
            ]
        }
        if req.n_values is not None:
            protocol_kwargs["n_values"] = req.n_values
        if req.lam_values is not None:
            protocol_kwargs["lam_values"] = req.lam_values
        results = grid_tune(TuningProtocol(**protocol_kwargs), base)
        return schemas.TuneResponse(
            results=[
                schemas.TuneResultItem(
                    collection=r.collection,
                    n=r.n,
                    lam=r.lam,
                    train_objective=r.train_objective,
                    heldout_means=r.heldout_means,
                )
                for r in results
            ]
        )

    @app.post("/stratify", response_model=schemas.StratifyResponse)
    def stratify_endpoint(req: schemas.StratifyRequest):
        per_topic = read_pertopic_tsv(req.pertopic_path)
        topics = read_topics(req.topics_path)
        collection = load_queries(req.queries_path)
        buckets = stratify_topics(topics, collection, req.boundaries)
        report = stratified_report(per_topic, buckets, req.boundaries)
        if req.out_path:
            write_stratified_tsv(report, req.out_path)
        return schemas.StratifyResponse(
            order=report["order"],
            buckets=report["buckets"],
            total_topics=report["total_topics"],
            out_path=req.out_path,
        )

    return app
