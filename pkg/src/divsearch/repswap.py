"""Sense prototypes from per-term context vectors, and pooled intent selection.

The neural side (vector extraction, in-model swapping) lives out of process;
this module clusters extracted vectors into k sense prototypes and merges the
intent sets produced by the per-prototype generation runs into one diverse
set via the xQuAD selection rule.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from .diversify import ProbMatrix, XquadConfig, xquad
from .errors import DataError
from .intentgen import Intent, IntentSet


@dataclass
class TermVectors:
    term: str
    entries: list[tuple[str, np.ndarray]]  # (passage_id, vector)


@dataclass
class Prototype:
    vector: np.ndarray
    passage_id: str
    cluster_size: int


@dataclass
class TermPrototypes:
    term: str
    prototypes: list[Prototype]


@dataclass
class RsConfig:
    k: int = 5  # sense clusters per term
    l: int = 1  # maximum query length the swap applies to
    lam: float = 1.0  # selection mixing weight
    passage_budget: int = 1000

    def __post_init__(self):
        if self.k < 1 or self.l < 1:
            raise ValueError("k and l must be >= 1")


def _cosine_distances(data: np.ndarray) -> np.ndarray:
    """Condensed pairwise cosine distances; zero-norm vectors sit at distance 1."""
    norms = np.linalg.norm(data, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    unit = data / safe[:, None]
    sim = unit @ unit.T
    dist = 1.0 - (sim + sim.T) / 2.0
    np.fill_diagonal(dist, 0.0)
    return squareform(np.clip(dist, 0.0, 2.0), checks=False)


def _pick_prototype(members: list[tuple[str, np.ndarray]]) -> tuple[str, np.ndarray]:
    """Member closest (Euclidean) to the coordinate-wise median; ties by passage_id."""
    vectors = np.stack([v for _, v in members])
    median = np.median(vectors, axis=0)
    best = None
    best_dist = None
    for pid, vec in sorted(members, key=lambda e: e[0]):
        dist = float(np.linalg.norm(vec - median))
        if best_dist is None or dist < best_dist:
            best_dist = dist
            best = (pid, vec)
    return best


def cluster_prototypes(vectors: TermVectors, k: int) -> TermPrototypes:
    """Agglomerative clustering (average linkage, cosine distance) into k clusters.

    Each cluster's prototype is the member vector nearest the coordinate-wise
    median of the cluster; prototypes are always members, never synthetic
    centroids. Fewer distinct vectors than k degrade to singleton clusters.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not vectors.entries:
        raise ValueError("no vectors to cluster")
    entries = sorted(vectors.entries, key=lambda e: e[0])
    dims = {e[1].shape for e in entries}
    if len(dims) != 1:
        raise DataError(f"term {vectors.term!r}: inconsistent vector dimensions")

    by_value: dict[bytes, list[tuple[str, np.ndarray]]] = {}
    for pid, vec in entries:
        by_value.setdefault(np.asarray(vec, dtype=float).tobytes(), []).append((pid, vec))

    if len(by_value) <= k:
        groups = list(by_value.values())
    elif k == 1:
        groups = [entries]
    else:
        data = np.stack([np.asarray(v, dtype=float) for _, v in entries])
        merges = linkage(_cosine_distances(data), method="average")
        labels = fcluster(merges, t=k, criterion="maxclust")
        clusters: dict[int, list[tuple[str, np.ndarray]]] = {}
        for entry, label in zip(entries, labels):
            clusters.setdefault(int(label), []).append(entry)
        groups = list(clusters.values())

    prototypes = []
    for members in groups:
        pid, vec = _pick_prototype(members)
        prototypes.append(
            Prototype(vector=np.asarray(vec, dtype=float), passage_id=pid,
                      cluster_size=len(members))
        )
    prototypes.sort(key=lambda p: (-p.cluster_size, p.passage_id))
    return TermPrototypes(term=vectors.term, prototypes=prototypes)


def pool_and_select(runs: list[IntentSet], n: int, lam: float = 1.0) -> IntentSet:
    """Merge per-run intent sets into one set spanning the runs.

    Each run is a pseudo-intent group; a candidate's relevance to a group is
    its softmax generation probability within that run (0 if absent). The
    xQuAD rule with the given lam picks n intents; duplicates across runs are
    selected at most once.
    """
    if not runs:
        raise ValueError("need at least one run")
    if n < 1:
        raise ValueError("n must be >= 1")
    order: list[str] = []  # first-seen candidate order
    candidates: dict[str, Intent] = {}
    per_run_lp: list[dict[str, float]] = []
    for run in runs:
        lps: dict[str, float] = {}
        for intent in run.intents:
            key = intent.full_text
            if key not in candidates:
                candidates[key] = intent
                order.append(key)
            elif intent.logprob > candidates[key].logprob:
                candidates[key] = intent
            if key not in lps or intent.logprob > lps[key]:
                lps[key] = intent.logprob
        per_run_lp.append(lps)
    if not order:
        return IntentSet(query=runs[0].query, intents=[])

    columns: dict[str, list[float]] = {}
    labels = ["q0"] + [f"g{j}" for j in range(1, len(runs) + 1)]
    group_probs: list[dict[str, float]] = []
    for lps in per_run_lp:
        if lps:
            mx = max(lps.values())
            weights = {key: np.exp(lp - mx) for key, lp in lps.items()}
            total = sum(weights.values())
            group_probs.append({key: w / total for key, w in weights.items()})
        else:
            group_probs.append({})
    for j, probs in enumerate(group_probs, 1):
        columns[f"g{j}"] = [probs.get(key, 0.0) for key in order]
    # Original-query relevance (only used when lam < 1): best group probability.
    columns["q0"] = [
        max((probs.get(key, 0.0) for probs in group_probs), default=0.0)
        for key in order
    ]
    matrix = ProbMatrix(qid="", docnos=list(order), labels=labels, columns=columns)
    selected = xquad(matrix, XquadConfig(lam=lam), depth=n)
    return IntentSet(query=runs[0].query, intents=[candidates[key] for key in selected])


def rs_gate(query_tokens, l: int) -> bool:
    """True iff the query has between 1 and l tokens."""
    return 0 < len(query_tokens) <= l


# --- vector file formats ----------------------------------------------------


def read_term_vectors(path: str) -> dict[str, TermVectors]:
    """Read JSONL {"term", "passage_id", "vector": [floats]} grouped by term."""
    out: dict[str, TermVectors] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                term = str(record["term"])
                pid = str(record["passage_id"])
                vec = np.asarray(record["vector"], dtype=float)
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: bad vector record: {exc}") from exc
            out.setdefault(term, TermVectors(term=term, entries=[])).entries.append(
                (pid, vec)
            )
    return out


def write_prototypes(prototypes: list[TermPrototypes], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tp in prototypes:
            for proto in tp.prototypes:
                fh.write(
                    json.dumps(
                        {
                            "term": tp.term,
                            "passage_id": proto.passage_id,
                            "vector": [float(x) for x in proto.vector],
                            "cluster_size": proto.cluster_size,
                        },
                        separators=(",", ":"),
                    )
                )
                fh.write("\n")
