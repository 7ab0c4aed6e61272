"""Contextual term-vector extraction from passages.

For each sampled passage containing the term, the passage is encoded and the
term's chunk vectors (first occurrence) are concatenated into one flat
vector. Vectors for one term always share a length: chunking is
deterministic per word.
"""

from __future__ import annotations

import json
import random
import sys

import torch

from .generate import _word_spans
from .train import load_checkpoint
from .vocab import PAD, chunk_word, tokenize


def _load_passages(path: str) -> list[tuple[str, str]]:
    passages = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            pid = record.get("passage_id", record.get("docno"))
            text = record.get("text")
            if pid is None or text is None:
                raise ValueError(f"{path}:{lineno}: need passage_id/docno and text")
            passages.append((str(pid), str(text)))
    return passages


def extract_representations(
    checkpoint: str,
    term: str,
    passages_path: str,
    out_path: str,
    budget: int = 1000,
    seed: int = 0,
) -> int:
    """Write JSONL {"term", "passage_id", "vector"} rows; returns the count."""
    model, chunk_vocab, _, _ = load_checkpoint(checkpoint)
    term = term.lower()
    matching = [
        (pid, tokenize(text))
        for pid, text in _load_passages(passages_path)
        if term in tokenize(text)
    ]
    if not matching:
        print(
            f"warning: term {term!r} not found in any passage", file=sys.stderr
        )
        open(out_path, "w", encoding="utf-8").close()
        return 0
    if len(matching) > budget:
        rng = random.Random(seed)
        picked = set(rng.sample(range(len(matching)), budget))
        matching = [m for i, m in enumerate(matching) if i in picked]

    written = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for pid, words in matching:
            chunks = []
            for word in words:
                chunks.extend(chunk_word(word))
            ids = torch.tensor([chunk_vocab.encode(chunks)], dtype=torch.long)
            pad_mask = ids.eq(PAD)
            with torch.no_grad():
                memory = model.encode(ids, pad_mask)
            start, end = next(
                (s, e) for word, s, e in _word_spans(words) if word == term
            )
            vector = memory[0, start:end].reshape(-1).tolist()
            fh.write(
                json.dumps(
                    {"term": term, "passage_id": pid, "vector": vector},
                    separators=(",", ":"),
                )
            )
            fh.write("\n")
            written += 1
    return written
