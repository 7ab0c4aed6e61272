"""xQuAD and PM2 aggregation over unit-interval score matrices.

Raw scores are mapped to [0, 1] by per-column min-max normalization, then a
greedy aggregator re-ranks the pool. Both aggregators are deterministic:
ties are broken by the initial pool order (and, for PM2's intent choice, by
column order).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DataError
from .scoring import ScoreMatrix

DEFAULT_DEPTH = 20


@dataclass
class ProbMatrix:
    """Same shape as ScoreMatrix with all values in [0, 1]."""

    qid: str
    docnos: list[str]
    labels: list[str]
    columns: dict[str, list[float]] = field(default_factory=dict)

    @property
    def intent_labels(self) -> list[str]:
        return [label for label in self.labels if label != "q0"]


def normalize(matrix: ScoreMatrix) -> ProbMatrix:
    """Per-column min-max over the pool; constant columns map to zeros."""
    columns: dict[str, list[float]] = {}
    for label in matrix.labels:
        values = matrix.columns[label]
        if not values:
            columns[label] = []
            continue
        lo, hi = min(values), max(values)
        if hi == lo:
            columns[label] = [0.0] * len(values)
        else:
            columns[label] = [(v - lo) / (hi - lo) for v in values]
    return ProbMatrix(
        qid=matrix.qid,
        docnos=list(matrix.docnos),
        labels=list(matrix.labels),
        columns=columns,
    )


@dataclass
class XquadConfig:
    lam: float = 0.5
    priors: list[float] | None = None  # over intent columns; None = uniform


def xquad(
    probs: ProbMatrix,
    cfg: XquadConfig,
    depth: int | None = DEFAULT_DEPTH,
    trace: list | None = None,
) -> list[str]:
    """Greedy selection maximizing
    (1 - lam) * P(d|q) + lam * sum_i P(i|q) * P(d|i) * prod_{d' selected} (1 - P(d'|i)).
    """
    if "q0" not in probs.columns:
        raise DataError("probability matrix has no original-query column q0")
    intents = probs.intent_labels
    m = len(intents)
    if cfg.priors is not None:
        if len(cfg.priors) != m:
            raise DataError(f"expected {m} intent priors, got {len(cfg.priors)}")
        priors = list(cfg.priors)
        total = sum(priors)
        if m and abs(total - 1.0) > 1e-9:
            raise DataError("intent priors must sum to 1")
    else:
        priors = [1.0 / m] * m if m else []
    q0 = probs.columns["q0"]
    cols = [probs.columns[label] for label in intents]
    n = len(probs.docnos)
    limit = n if depth is None else min(depth, n)
    coverage = [1.0] * m
    remaining = list(range(n))
    out: list[str] = []
    for _ in range(limit):
        best_idx = None
        best_score = None
        for idx in remaining:  # pool order; strict > keeps the earliest on ties
            diversity = sum(
                priors[j] * cols[j][idx] * coverage[j] for j in range(m)
            )
            score = (1.0 - cfg.lam) * q0[idx] + cfg.lam * diversity
            if best_score is None or score > best_score:
                best_score = score
                best_idx = idx
        remaining.remove(best_idx)
        out.append(probs.docnos[best_idx])
        for j in range(m):
            coverage[j] *= 1.0 - cols[j][best_idx]
        if trace is not None:
            trace.append(
                {
                    "rank": len(out),
                    "docno": probs.docnos[best_idx],
                    "objective": best_score,
                }
            )
    return out


def pm2(
    probs: ProbMatrix,
    lam: float = 0.5,
    depth: int | None = DEFAULT_DEPTH,
    trace: list | None = None,
) -> list[str]:
    """Proportional-representation aggregation via the quotient v_i / (2 s_i + 1).

    Each step picks the least-represented intent, then the document maximizing
    lam * qt_i* * P(d|i*) + (1 - lam) * sum_{i != i*} qt_i * P(d|i). Seats are
    incremented by each document's normalized per-intent probabilities; the
    original-query column is ignored.
    """
    intents = probs.intent_labels
    m = len(intents)
    if m == 0:
        raise DataError("pm2 requires at least one intent column")
    cols = [probs.columns[label] for label in intents]
    votes = [1.0 / m] * m
    seats = [0.0] * m
    n = len(probs.docnos)
    limit = n if depth is None else min(depth, n)
    remaining = list(range(n))
    out: list[str] = []
    for _ in range(limit):
        quotients = [votes[j] / (2.0 * seats[j] + 1.0) for j in range(m)]
        istar = max(range(m), key=lambda j: (quotients[j], -j))
        best_idx = None
        best_score = None
        for idx in remaining:
            score = lam * quotients[istar] * cols[istar][idx] + (1.0 - lam) * sum(
                quotients[j] * cols[j][idx] for j in range(m) if j != istar
            )
            if best_score is None or score > best_score:
                best_score = score
                best_idx = idx
        remaining.remove(best_idx)
        out.append(probs.docnos[best_idx])
        denom = sum(cols[j][best_idx] for j in range(m))
        if denom > 0.0:
            for j in range(m):
                seats[j] += cols[j][best_idx] / denom
        if trace is not None:
            trace.append(
                {
                    "rank": len(out),
                    "docno": probs.docnos[best_idx],
                    "intent": intents[istar],
                    "quotient": quotients[istar],
                    "objective": best_score,
                }
            )
    return out
