"""Pydantic request/response models for the diversification service."""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, Field


class BuildTreeRequest(BaseModel):
    queries_path: str
    out_path: str


class BuildTreeResponse(BaseModel):
    total_queries: int
    root_children: int
    out_path: str


class DclmSamplesRequest(BaseModel):
    tree_path: str
    walks: int = Field(ge=1)
    seed: int = 0
    out_path: str


class ClmSamplesRequest(BaseModel):
    queries_path: str
    out_path: str


class SamplesResponse(BaseModel):
    samples: int
    out_path: str


class IntentItem(BaseModel):
    text: str
    score: float


class TopicIntents(BaseModel):
    qid: str
    query: str
    intents: list[IntentItem]


class GenerateRequest(BaseModel):
    tree_path: str
    query: str | None = None
    topics_path: str | None = None
    n: int = Field(default=5, ge=1, le=20)
    beam: int = Field(default=30, ge=1)
    out_path: str | None = None


class GenerateResponse(BaseModel):
    results: list[TopicIntents]
    out_path: str | None = None


class RetrieveRequest(BaseModel):
    corpus_path: str
    topics_path: str
    scorer: str = "dph"
    depth: int = Field(default=100, ge=1)
    max_passage: bool = False
    window: int = 150
    stride: int = 75
    out_path: str
    tag: str = "divsearch"


class RetrieveResponse(BaseModel):
    topics: int
    out_path: str


class ScoreRequest(BaseModel):
    corpus_path: str
    topics_path: str
    pools_path: str  # run file defining each topic's candidate pool
    intents_path: str  # intents JSONL
    scorer: str = "dph"
    n: int = Field(default=20, ge=1, le=20)
    use_full_text: bool = True
    max_passage: bool = False
    window: int = 150
    stride: int = 75
    out_path: str


class ScoreResponse(BaseModel):
    matrices: int
    out_path: str


class DiversifyRequest(BaseModel):
    scores_path: str
    aggregator: str = "xquad"
    lam: float = Field(default=0.5, ge=0.0, le=1.0)
    n: int | None = Field(default=None, ge=1, le=20)
    depth: int | None = None
    out_path: str
    tag: str = "divsearch"
    trace_path: str | None = None


class DiversifyResponse(BaseModel):
    topics: int
    out_path: str


class EvaluateRequest(BaseModel):
    run_path: str
    qrels_path: str
    alpha: float = 0.5
    beta: float = 0.5
    cutoff: int = Field(default=20, ge=1)
    pertopic_path: str | None = None
    summary_path: str | None = None


class EvaluateResponse(BaseModel):
    means: dict[str, float]
    per_topic: dict[str, dict[str, float]]
    undefined_topics: list[str]


class RunRequest(BaseModel):
    config_path: str | None = None
    overrides: dict[str, Any] = Field(default_factory=dict)


class RunResponse(BaseModel):
    out_dir: str
    means: dict[str, float]
    undefined_topics: list[str]
    artifacts: dict[str, dict[str, str]]


class CollectionItem(BaseModel):
    name: str
    topics: str
    qrels: str


class TuneRequest(BaseModel):
    config_path: str | None = None
    overrides: dict[str, Any] = Field(default_factory=dict)
    collections: list[CollectionItem]
    n_values: list[int] | None = None
    lam_values: list[float] | None = None


class TuneResultItem(BaseModel):
    collection: str
    n: int
    lam: float
    train_objective: float
    heldout_means: dict[str, float]


class TuneResponse(BaseModel):
    results: list[TuneResultItem]


class StratifyRequest(BaseModel):
    pertopic_path: str
    topics_path: str
    queries_path: str
    boundaries: list[int] = Field(default_factory=lambda: [1, 37])
    out_path: str | None = None


class StratifyResponse(BaseModel):
    order: list[str]
    buckets: dict[str, dict[str, float]]
    total_topics: int
    out_path: str | None = None


class HealthResponse(BaseModel):
    status: str
    version: str
