"""Lexical scorers (DPH, BM25), MaxPassage, candidate pools, score matrices.

The corpus is held in memory (JSONL, one {"docno", "text"} per line) with
collection statistics computed once at load. All scorers are pure functions
of (query tokens, document tokens, corpus stats).
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .errors import DataError
from .intentgen import IntentSet
from .tokens import tokenize

DEFAULT_POOL_DEPTH = 100
DEFAULT_WINDOW = 150
DEFAULT_STRIDE = 75


@dataclass
class CorpusStats:
    n_docs: int
    avg_len: float
    coll_tf: dict[str, int]  # total occurrences per term
    df: dict[str, int]  # documents containing each term


class Corpus:
    def __init__(self, documents: dict[str, str]):
        self.documents = documents
        self._tokens: dict[str, list[str]] = {
            docno: tokenize(text) for docno, text in documents.items()
        }
        coll_tf: Counter = Counter()
        df: Counter = Counter()
        total_len = 0
        for toks in self._tokens.values():
            counts = Counter(toks)
            total_len += len(toks)
            coll_tf.update(counts)
            df.update(counts.keys())
        n = len(documents)
        self.stats = CorpusStats(
            n_docs=n,
            avg_len=total_len / n if n else 0.0,
            coll_tf=dict(coll_tf),
            df=dict(df),
        )

    @classmethod
    def from_jsonl(cls, path: str) -> "Corpus":
        documents: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    docno = str(record["docno"])
                    text = str(record["text"])
                except (KeyError, TypeError, json.JSONDecodeError) as exc:
                    raise DataError(f"{path}:{lineno}: bad corpus record: {exc}") from exc
                if docno in documents:
                    raise DataError(f"{path}:{lineno}: duplicate docno {docno!r}")
                documents[docno] = text
        return cls(documents)

    def doc_tokens(self, docno: str) -> list[str]:
        try:
            return self._tokens[docno]
        except KeyError:
            raise DataError(f"unknown docno: {docno}") from None

    def __len__(self) -> int:
        return len(self.documents)


class DphScorer:
    """Parameter-free DPH divergence-from-randomness scorer."""

    def __init__(self, stats: CorpusStats):
        self.stats = stats

    def score_counts(
        self, query: Sequence[str], counts: Counter, doc_len: int
    ) -> float:
        if doc_len == 0:
            return 0.0
        s = self.stats
        total = 0.0
        for term, qtf in Counter(query).items():
            tf = counts.get(term, 0)
            if tf == 0:
                continue
            cf = s.coll_tf.get(term, 0)
            if cf == 0:
                continue  # term absent from the collection contributes 0
            if tf >= doc_len:
                continue  # f = 1: the (1 - f)^2 factor zeroes the contribution
            f = tf / doc_len
            norm = (1.0 - f) ** 2 / (tf + 1.0)
            total += (
                qtf
                * norm
                * (
                    tf * math.log2((tf * s.avg_len / doc_len) * (s.n_docs / cf))
                    + 0.5 * math.log2(2.0 * math.pi * tf * (1.0 - f))
                )
            )
        return total

    def score_tokens(self, query: Sequence[str], doc_tokens: Sequence[str]) -> float:
        return self.score_counts(query, Counter(doc_tokens), len(doc_tokens))


class Bm25Scorer:
    """Okapi BM25 with the smoothed IDF ln((N - df + 0.5)/(df + 0.5) + 1)."""

    def __init__(self, stats: CorpusStats, k1: float = 1.2, b: float = 0.75):
        self.stats = stats
        self.k1 = k1
        self.b = b

    def score_counts(
        self, query: Sequence[str], counts: Counter, doc_len: int
    ) -> float:
        s = self.stats
        total = 0.0
        for term, qtf in Counter(query).items():
            tf = counts.get(term, 0)
            if tf == 0:
                continue
            df = s.df.get(term, 0)
            idf = math.log((s.n_docs - df + 0.5) / (df + 0.5) + 1.0)
            denom = tf + self.k1 * (1.0 - self.b + self.b * doc_len / s.avg_len)
            total += qtf * idf * tf * (self.k1 + 1.0) / denom
        return total

    def score_tokens(self, query: Sequence[str], doc_tokens: Sequence[str]) -> float:
        return self.score_counts(query, Counter(doc_tokens), len(doc_tokens))


def iter_windows(
    tokens: Sequence[str], window: int = DEFAULT_WINDOW, stride: int = DEFAULT_STRIDE
):
    """Sliding windows over tokens; the final (possibly partial) window is included."""
    if window <= 0 or stride <= 0:
        raise ValueError("window and stride must be positive")
    start = 0
    while True:
        end = start + window
        yield tokens[start:end]
        if end >= len(tokens):
            break
        start += stride


def max_passage(
    scorer,
    query: Sequence[str],
    doc_tokens: Sequence[str],
    window: int = DEFAULT_WINDOW,
    stride: int = DEFAULT_STRIDE,
) -> float:
    """Maximum window score over sliding windows of the document."""
    if not doc_tokens:
        return 0.0
    return max(
        scorer.score_tokens(query, win) for win in iter_windows(doc_tokens, window, stride)
    )


class MaxPassageScorer:
    """Adapter giving a windowed scorer the plain score_tokens interface."""

    def __init__(self, scorer, window: int = DEFAULT_WINDOW, stride: int = DEFAULT_STRIDE):
        self.scorer = scorer
        self.window = window
        self.stride = stride

    def score_tokens(self, query: Sequence[str], doc_tokens: Sequence[str]) -> float:
        return max_passage(self.scorer, query, doc_tokens, self.window, self.stride)


@dataclass
class CandidatePool:
    qid: str
    entries: list[tuple[str, float]]  # (docno, score), scores non-increasing

    @property
    def docnos(self) -> list[str]:
        return [d for d, _ in self.entries]


def retrieve(
    corpus: Corpus,
    query: Sequence[str],
    scorer,
    qid: str = "",
    depth: int = DEFAULT_POOL_DEPTH,
) -> CandidatePool:
    """Score every document containing a query term; keep the top `depth`.

    Ties broken by docno for a deterministic pool order.
    """
    query_terms = set(query)
    scored = []
    for docno, toks in corpus._tokens.items():
        if not query_terms.intersection(toks):
            continue
        scored.append((docno, scorer.score_tokens(query, toks)))
    scored.sort(key=lambda e: (-e[1], e[0]))
    return CandidatePool(qid=qid, entries=scored[:depth])


@dataclass
class ScoreMatrix:
    """Raw relevance scores: one q0 column plus one column per intent."""

    qid: str
    docnos: list[str]
    labels: list[str]  # "q0", "i1", ... in column order
    columns: dict[str, list[float]] = field(default_factory=dict)

    def column(self, label: str) -> list[float]:
        return self.columns[label]


def build_matrix(
    pool: CandidatePool,
    query: str,
    intents: IntentSet,
    scorer,
    corpus: Corpus,
    use_full_text: bool = True,
) -> ScoreMatrix:
    """Score each pool document against the query and every intent.

    Intents are scored as their full text (query + continuation) unless
    `use_full_text` is off, in which case the continuation alone is used.
    """
    docnos = pool.docnos
    doc_tokens = [corpus.doc_tokens(d) for d in docnos]
    labels = ["q0"] + [f"i{j}" for j in range(1, len(intents.intents) + 1)]
    columns: dict[str, list[float]] = {}
    query_tokens = tokenize(query)
    columns["q0"] = [scorer.score_tokens(query_tokens, toks) for toks in doc_tokens]
    for j, intent in enumerate(intents.intents, 1):
        text = intent.full_text if use_full_text else " ".join(intent.continuation)
        itoks = tokenize(text)
        columns[f"i{j}"] = [scorer.score_tokens(itoks, toks) for toks in doc_tokens]
    return ScoreMatrix(qid=pool.qid, docnos=docnos, labels=labels, columns=columns)


# --- score matrix TSV (qid blocks) -----------------------------------------


def write_matrices_tsv(matrices: Sequence[ScoreMatrix], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for m, matrix in enumerate(matrices):
            if m:
                fh.write("\n")
            fh.write(f"qid\t{matrix.qid}\n")
            fh.write("docno\t" + "\t".join(matrix.labels) + "\n")
            for i, docno in enumerate(matrix.docnos):
                row = [repr(matrix.columns[label][i]) for label in matrix.labels]
                fh.write(docno + "\t" + "\t".join(row) + "\n")


def read_matrices_tsv(path: str, qids: set[str] | None = None) -> list[ScoreMatrix]:
    """Parse qid-block score matrices; errors carry the offending line number."""
    matrices: list[ScoreMatrix] = []
    current: ScoreMatrix | None = None
    expect_header = False
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                current = None
                continue
            parts = line.split("\t")
            if current is None and not expect_header:
                if parts[0] != "qid" or len(parts) != 2:
                    raise DataError(f"{path}:{lineno}: expected 'qid<TAB><id>' block start")
                qid = parts[1]
                if qids is not None and qid not in qids:
                    raise DataError(f"{path}:{lineno}: unknown qid {qid!r}")
                if any(m.qid == qid for m in matrices):
                    raise DataError(f"{path}:{lineno}: duplicate qid block {qid!r}")
                current = ScoreMatrix(qid=qid, docnos=[], labels=[], columns={})
                matrices.append(current)
                expect_header = True
                continue
            if expect_header:
                if parts[0] != "docno" or len(parts) < 2:
                    raise DataError(f"{path}:{lineno}: expected 'docno<TAB>q0...' header")
                labels = parts[1:]
                if len(set(labels)) != len(labels):
                    raise DataError(f"{path}:{lineno}: duplicate column labels")
                current.labels = labels
                current.columns = {label: [] for label in labels}
                expect_header = False
                continue
            if len(parts) != len(current.labels) + 1:
                raise DataError(
                    f"{path}:{lineno}: expected {len(current.labels) + 1} columns, got {len(parts)}"
                )
            docno = parts[0]
            if docno in current.docnos:
                raise DataError(f"{path}:{lineno}: duplicate docno {docno!r}")
            current.docnos.append(docno)
            for label, value in zip(current.labels, parts[1:]):
                try:
                    current.columns[label].append(float(value))
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: bad score {value!r}") from exc
    if expect_header:
        raise DataError(f"{path}: truncated block for qid {matrices[-1].qid!r}")
    return matrices


# --- TREC run files ---------------------------------------------------------


def write_run(
    path: str, rankings: Sequence[tuple[str, Sequence[str]]], tag: str = "divsearch"
) -> None:
    """Write rankings as 6-column TREC run lines with descending synthetic scores."""
    with open(path, "w", encoding="utf-8") as fh:
        for qid, docnos in rankings:
            n = len(docnos)
            for rank, docno in enumerate(docnos, 1):
                fh.write(f"{qid} Q0 {docno} {rank} {float(n - rank + 1):.6f} {tag}\n")


def read_run(path: str) -> dict[str, list[str]]:
    """Read a TREC run file; per qid, docnos ordered by score desc (file order on ties)."""
    rows: dict[str, list[tuple[float, int, str]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise DataError(f"{path}:{lineno}: expected 6 columns, got {len(parts)}")
            qid, _, docno, _, score, _ = parts
            try:
                value = float(score)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad score {score!r}") from exc
            rows.setdefault(qid, []).append((-value, lineno, docno))
    out: dict[str, list[str]] = {}
    for qid, entries in rows.items():
        entries.sort()
        seen = set()
        docnos = []
        for _, _, docno in entries:
            if docno in seen:
                raise DataError(f"{path}: duplicate docno {docno!r} for qid {qid!r}")
            seen.add(docno)
            docnos.append(docno)
        out[qid] = docnos
    return out
