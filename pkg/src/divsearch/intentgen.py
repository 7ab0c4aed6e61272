"""Candidate intent generation: deterministic beam search plus filtering.

Any next-token model can drive the search; the count language model over a
prefix tree is the built-in one. Generated sequences are filtered (query-term
removal, 6-character minimum), deduplicated, and ranked by log-probability.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from .errors import DataError
from .querylog import PrefixTree, node_at
from .tokens import EOQ, MAX_QUERY_TOKENS, tokenize

DEFAULT_BEAM = 30
MAX_INTENTS = 20
MIN_CONTINUATION_CHARS = 6


class NextTokenModel(Protocol):
    def next_distribution(self, prefix: Sequence[str]) -> dict[str, float]:
        """Probabilities of the next token (EOQ included); empty if the prefix is unknown."""
        ...


class CountLM:
    """Next-token model backed by prefix-tree counts.

    P(t | p) = count(p.t) / count(p) and P(EOQ | p) = end_count(p) / count(p),
    which sum to 1 by count conservation. Prefixes absent from the tree yield
    the empty distribution.
    """

    def __init__(self, tree: PrefixTree):
        self.tree = tree

    def next_distribution(self, prefix: Sequence[str]) -> dict[str, float]:
        node = node_at(self.tree, prefix)
        if node is None or node.count == 0:
            return {}
        dist: dict[str, float] = {}
        if node.end_count:
            dist[EOQ] = node.end_count / node.count
        for tok, child in node.children.items():
            dist[tok] = child.count / node.count
        return dist


def beam_search(
    model: NextTokenModel,
    query: Sequence[str],
    beam: int,
    max_tokens: int = MAX_QUERY_TOKENS,
) -> list[tuple[list[str], float]]:
    """Deterministic beam search for continuations of `query`.

    Ended hypotheses (EOQ emitted) compete for beam slots with active ones, so
    beam width 1 is exactly greedy decoding. Sequences still active at the
    token cap are returned as completed. No length penalty; ties broken by
    lexicographic token order.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    query = list(query)
    # (continuation tokens, logprob, done)
    beams: list[tuple[tuple[str, ...], float, bool]] = [((), 0.0, False)]
    for _ in range(max_tokens):
        if all(done for _, _, done in beams):
            break
        candidates = [b for b in beams if b[2]]
        for tokens, lp, done in beams:
            if done:
                continue
            dist = model.next_distribution(query + list(tokens))
            for tok in sorted(dist):
                p = dist[tok]
                if p <= 0.0:
                    continue
                if tok == EOQ:
                    candidates.append((tokens, lp + math.log(p), True))
                else:
                    candidates.append((tokens + (tok,), lp + math.log(p), False))
        if not candidates:
            return []
        candidates.sort(key=lambda c: (-c[1], c[0]))
        beams = candidates[:beam]
    return [
        (list(tokens), lp)
        for tokens, lp, _ in sorted(beams, key=lambda c: (-c[1], c[0]))
    ]


@dataclass
class Intent:
    continuation: tuple[str, ...]
    full_text: str  # original query + " " + continuation
    logprob: float


@dataclass
class IntentSet:
    query: str
    intents: list[Intent] = field(default_factory=list)


def filter_intents(
    raw: Sequence[tuple[Sequence[str], float]], query: Sequence[str], n: int
) -> IntentSet:
    """Filter and rank raw candidates.

    Tokens exactly matching a query token are removed from the candidate; the
    remainder is dropped when shorter than 6 characters (spaces excluded).
    Identical continuations are deduplicated keeping the higher logprob; the
    top n survivors are returned sorted by logprob, ties lexicographic.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    query_tokens = set(query)
    best: dict[tuple[str, ...], float] = {}
    for seq, lp in raw:
        continuation = tuple(t for t in seq if t not in query_tokens)
        if sum(len(t) for t in continuation) < MIN_CONTINUATION_CHARS:
            continue
        if continuation not in best or lp > best[continuation]:
            best[continuation] = lp
    query_text = " ".join(query)
    ranked = sorted(best.items(), key=lambda item: (-item[1], item[0]))[:n]
    intents = [
        Intent(
            continuation=cont,
            full_text=query_text + " " + " ".join(cont),
            logprob=lp,
        )
        for cont, lp in ranked
    ]
    return IntentSet(query=query_text, intents=intents)


def generate(
    model: NextTokenModel, query: str, n: int, beam: int = DEFAULT_BEAM
) -> IntentSet:
    """Tokenize, beam-search, filter. Byte-identical across repeated calls."""
    if not query.strip():
        raise ValueError("empty query")
    query_tokens = tokenize(query)
    raw = beam_search(model, query_tokens, beam=beam)
    return filter_intents(raw, query_tokens, n=n)


# --- intents file format ----------------------------------------------------


def write_intents_jsonl(sets: Sequence[tuple[str, IntentSet]], path: str) -> None:
    """Write IntentSets as JSONL: {"qid", "intents": [{"text", "score"}]}."""
    with open(path, "w", encoding="utf-8") as fh:
        for qid, iset in sets:
            record = {
                "qid": qid,
                "intents": [
                    {"text": it.full_text, "score": it.logprob} for it in iset.intents
                ],
            }
            fh.write(json.dumps(record, separators=(",", ":")))
            fh.write("\n")


def read_intents_jsonl(path: str) -> dict[str, IntentSet]:
    """Load an intents file (also the ingestion format for suggestion baselines).

    Ingested intents bypass generation filtering: text and order are kept
    as-is, with score as the logprob.
    """
    out: dict[str, IntentSet] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                qid = str(record["qid"])
                intents = [
                    Intent(
                        continuation=tuple(tokenize(item["text"])),
                        full_text=item["text"],
                        logprob=float(item["score"]),
                    )
                    for item in record["intents"]
                ]
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: bad intents record: {exc}") from exc
            if qid in out:
                raise DataError(f"{path}:{lineno}: duplicate qid {qid!r}")
            out[qid] = IntentSet(query=qid, intents=intents)
    return out
