import json
import random
import sys
from collections import defaultdict
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from intentserver.train import TrainConfig, finetune

MEMORIZE_QUERIES = [
    "alpha beta gamma",
    "delta epsilon",
    "zeta eta theta",
    "iota kappa",
    "lambda mu nu",
]

JAGUAR_QUERIES = [
    "jaguar car dealer",
    "jaguar car price",
    "jaguar car parts",
    "jaguar animal habitat",
    "jaguar animal diet",
    "jaguar animal speed",
]

JAGUAR_PASSAGES = {
    "p1": "the jaguar car engine roars on the road with price and dealer offers",
    "p2": "a new jaguar car model arrived at the dealer with parts and price list",
    "p3": "the jaguar animal hunts in the jungle habitat with great speed",
    "p4": "a wild jaguar animal stalks its prey diet in the rainforest habitat",
}


def clm_rows(queries):
    rows = []
    for q in queries:
        toks = q.split()
        for k in range(1, len(toks)):
            rows.append({"prefix": toks[:k], "next": toks[k]})
        rows.append({"prefix": toks, "next": "-eoq-"})
    return rows


def dclm_rows(queries):
    """One row per query position, targets = all continuations of the prefix.

    Popular prefixes repeat across rows, matching what random tree walks emit.
    """
    children = defaultdict(set)
    for q in queries:
        toks = q.split()
        for k in range(1, len(toks)):
            children[tuple(toks[:k])].add(toks[k])
    rows = []
    for q in queries:
        toks = q.split()
        for k in range(1, len(toks)):
            prefix = tuple(toks[:k])
            rows.append(
                {"prefix": list(prefix), "targets": sorted(children[prefix])}
            )
    return rows


def write_jsonl(rows, path):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return str(path)


def toy_log_200():
    """200 pseudo-random keyword queries with heavily shared prefixes."""
    rng = random.Random(11)
    heads = ["weather", "recipe", "trains", "movies", "garden", "laptop"]
    mids = ["today", "ideas", "cheap", "near", "best", "old", "new"]
    tails = ["online", "price", "guide", "list", "review", "map"]
    queries = []
    for _ in range(200):
        parts = [rng.choice(heads)]
        if rng.random() < 0.9:
            parts.append(rng.choice(mids))
        if rng.random() < 0.6:
            parts.append(rng.choice(tails))
        queries.append(" ".join(parts))
    return queries


@pytest.fixture(scope="session")
def memorize_checkpoint(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("memorize")
    samples = write_jsonl(clm_rows(MEMORIZE_QUERIES), tmp / "clm.jsonl")
    cfg = TrainConfig(objective="clm", lr=5e-3, epochs=150, batch_size=8, seed=1)
    return finetune(samples, cfg, str(tmp / "ckpt"))


@pytest.fixture(scope="session")
def jaguar_checkpoint(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("jaguar")
    samples = write_jsonl(dclm_rows(JAGUAR_QUERIES), tmp / "dclm.jsonl")
    cfg = TrainConfig(objective="dclm", lr=5e-3, epochs=220, batch_size=8, seed=3)
    return finetune(samples, cfg, str(tmp / "ckpt"))


@pytest.fixture(scope="session")
def jaguar_passages_path(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("passages")
    path = tmp / "passages.jsonl"
    write_jsonl(
        [{"passage_id": pid, "text": text} for pid, text in JAGUAR_PASSAGES.items()],
        path,
    )
    return str(path)


@pytest.fixture(scope="session")
def toylog_training(tmp_path_factory):
    """One-epoch distributional fine-tune on the 200-query toy log."""
    tmp = tmp_path_factory.mktemp("toylog")
    samples = write_jsonl(dclm_rows(toy_log_200()), tmp / "dclm.jsonl")
    cfg = TrainConfig(objective="dclm", lr=1e-3, epochs=1, batch_size=16, seed=7)
    return finetune(samples, cfg, str(tmp / "ckpt")), samples, cfg
