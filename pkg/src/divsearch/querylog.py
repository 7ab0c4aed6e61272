"""Query collections, the count prefix tree, and training-sample emission.

A query log is ingested as a plain list of query strings. The prefix tree
stores, per token path, how many queries pass through the node and how many
terminate there; it backs both the count language model and the emission of
distributional training samples (one sample per interior node visited on a
random root-to-leaf walk, targets = the node's children).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .errors import DataError
from .tokens import EOQ, MAX_QUERY_TOKENS, tokenize


@dataclass
class QueryCollection:
    """Raw query strings in file order."""

    queries: list[str]
    source: str = ""


def load_queries(path: str, source: str | None = None) -> QueryCollection:
    """Load a query log: TSV with the query in column 2, or one query per line.

    The format is auto-detected from the first non-blank line (tab present
    means TSV). Blank lines are skipped; entries keep file order.
    """
    queries: list[str] = []
    is_tsv: bool | None = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if is_tsv is None:
                is_tsv = "\t" in line
            if is_tsv:
                parts = line.split("\t")
                if len(parts) < 2:
                    raise DataError(f"{path}: expected >= 2 tab-separated columns: {line!r}")
                text = parts[1].strip()
            else:
                text = line.strip()
            if text:
                queries.append(text)
    return QueryCollection(queries=queries, source=source if source is not None else path)


@dataclass
class PrefixNode:
    token: str
    count: int = 0
    end_count: int = 0
    children: dict[str, "PrefixNode"] = field(default_factory=dict)


@dataclass
class PrefixTree:
    root: PrefixNode
    total_queries: int


def _sort_children(node: PrefixNode) -> None:
    node.children = dict(sorted(node.children.items()))
    for child in node.children.values():
        _sort_children(child)


def build_prefix_tree(collection: QueryCollection) -> PrefixTree:
    """Insert every tokenized query (truncated to 10 tokens) into a count trie.

    Children are kept in lexicographic order; queries that tokenize to nothing
    are skipped and not counted.
    """
    if not collection.queries:
        raise DataError("empty query collection")
    root = PrefixNode(token="")
    total = 0
    for query in collection.queries:
        tokens = tokenize(query)[:MAX_QUERY_TOKENS]
        if not tokens:
            continue
        total += 1
        root.count += 1
        node = root
        for tok in tokens:
            child = node.children.get(tok)
            if child is None:
                child = PrefixNode(token=tok)
                node.children[tok] = child
            child.count += 1
            node = child
        node.end_count += 1
    _sort_children(root)
    return PrefixTree(root=root, total_queries=total)


def node_at(tree: PrefixTree, prefix: Sequence[str]) -> PrefixNode | None:
    """Follow `prefix` from the root; None if the path is absent."""
    node = tree.root
    for tok in prefix:
        node = node.children.get(tok)
        if node is None:
            return None
    return node


@dataclass
class DclmSample:
    """A prefix and the uniform set of next tokens observed after it."""

    prefix: list[str]
    targets: list[str]  # sorted; each carries weight 1/len(targets)

    @property
    def target_weight(self) -> float:
        return 1.0 / len(self.targets)


def emit_dclm_samples(tree: PrefixTree, walks: int, seed: int) -> Iterator[DclmSample]:
    """Random root-to-leaf walks; one sample per interior step.

    Each sample's targets are exactly the current node's children. Children
    are chosen uniformly at each step; the stream is reproducible per seed.
    """
    if walks < 1:
        raise ValueError("walks must be >= 1")
    if not tree.root.children:
        raise DataError("prefix tree has no root children")
    rng = random.Random(seed)
    for _ in range(walks):
        node = rng.choice(list(tree.root.children.values()))
        prefix = [node.token]
        while node.children:
            yield DclmSample(prefix=list(prefix), targets=list(node.children.keys()))
            node = rng.choice(list(node.children.values()))
            prefix.append(node.token)


def emit_clm_samples(collection: QueryCollection) -> Iterator[tuple[list[str], str]]:
    """One (prefix, next-token) pair per token position, ending with the EOQ marker."""
    for query in collection.queries:
        tokens = tokenize(query)[:MAX_QUERY_TOKENS]
        if not tokens:
            continue
        for k in range(1, len(tokens)):
            yield tokens[:k], tokens[k]
        yield list(tokens), EOQ


def frequency(collection: QueryCollection, text: str) -> int:
    """Number of collection entries containing `text` case-insensitively anywhere."""
    if not text:
        raise ValueError("empty probe text")
    needle = text.lower()
    return sum(1 for q in collection.queries if needle in q.lower())


def bucket_label(count: int, boundaries: Sequence[int] = (1, 37)) -> str:
    """Bucket a frequency count: e.g. boundaries (1, 37) -> "0-1", "2-37", "38+"."""
    lo = 0
    for bound in boundaries:
        if count <= bound:
            return f"{lo}-{bound}"
        lo = bound + 1
    return f"{lo}+"


def bucket_labels(boundaries: Sequence[int] = (1, 37)) -> list[str]:
    """All bucket labels in ascending order."""
    labels = []
    lo = 0
    for bound in boundaries:
        labels.append(f"{lo}-{bound}")
        lo = bound + 1
    labels.append(f"{lo}+")
    return labels


def stratify(
    frequencies: dict[str, int], boundaries: Sequence[int] = (1, 37)
) -> dict[str, str]:
    """Assign each query its frequency bucket label."""
    bounds = list(boundaries)
    if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
        raise ValueError("boundaries must be strictly increasing")
    return {q: bucket_label(c, bounds) for q, c in frequencies.items()}


# --- JSON persistence -------------------------------------------------------


def _node_to_dict(node: PrefixNode) -> dict:
    return {
        "token": node.token,
        "count": node.count,
        "end_count": node.end_count,
        "children": [_node_to_dict(c) for c in node.children.values()],
    }


def _node_from_dict(data: dict) -> PrefixNode:
    node = PrefixNode(
        token=data["token"], count=data["count"], end_count=data["end_count"]
    )
    for child_data in data["children"]:
        child = _node_from_dict(child_data)
        node.children[child.token] = child
    return node


def save_tree(tree: PrefixTree, path: str) -> None:
    payload = {"total_queries": tree.total_queries, "root": _node_to_dict(tree.root)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")


def load_tree(path: str) -> PrefixTree:
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid tree JSON: {exc}") from exc
    tree = PrefixTree(
        root=_node_from_dict(payload["root"]), total_queries=payload["total_queries"]
    )
    _sort_children(tree.root)
    return tree


def write_dclm_jsonl(samples: Iterator[DclmSample], path: str) -> int:
    """Write samples as {"prefix": [...], "targets": [...]}; returns the count."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for sample in samples:
            fh.write(
                json.dumps(
                    {"prefix": sample.prefix, "targets": sample.targets},
                    separators=(",", ":"),
                )
            )
            fh.write("\n")
            n += 1
    return n


def write_clm_jsonl(pairs: Iterator[tuple[list[str], str]], path: str) -> int:
    """Write pairs as {"prefix": [...], "next": token}; returns the count."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for prefix, nxt in pairs:
            fh.write(json.dumps({"prefix": prefix, "next": nxt}, separators=(",", ":")))
            fh.write("\n")
            n += 1
    return n
