"""Word-level beam generation with optional representation swapping.

Each step re-encodes the full prefix (query plus generated words), optionally
replaces the chunk span of a swap term in the encoder memory, and reads the
next-word distribution. Ended hypotheses compete for beam slots, so beam
width 1 is greedy decoding; generation is capped at 10 words.
"""

from __future__ import annotations

import math

import numpy as np
import torch
import torch.nn.functional as F

from .model import NextWordModel
from .vocab import EOQ, PAD, UNK, Vocab, chunk_word

MAX_WORDS = 10


class SwapSpec:
    """A prototype vector to splice over every occurrence of a term."""

    def __init__(self, term: str, vector: list[float], d_model: int):
        self.term = term
        self.chunks = chunk_word(term)
        expected = len(self.chunks) * d_model
        flat = np.asarray(vector, dtype=np.float32)
        if flat.ndim != 1 or flat.shape[0] != expected:
            raise ValueError(
                f"swap vector for {term!r} must have {expected} components, "
                f"got {flat.shape}"
            )
        self.block = torch.from_numpy(flat.reshape(len(self.chunks), d_model))


def _word_spans(words: list[str]) -> list[tuple[str, int, int]]:
    spans = []
    pos = 0
    for word in words:
        width = len(chunk_word(word))
        spans.append((word, pos, pos + width))
        pos += width
    return spans


def next_word_logprobs(
    model: NextWordModel,
    chunk_vocab: Vocab,
    words: list[str],
    swap: SwapSpec | None = None,
) -> torch.Tensor:
    """Log-probabilities of the next word given the prefix words."""
    chunks = []
    for word in words:
        chunks.extend(chunk_word(word))
    ids = torch.tensor([chunk_vocab.encode(chunks)], dtype=torch.long)
    pad_mask = ids.eq(PAD)
    with torch.no_grad():
        memory = model.encode(ids, pad_mask)
        if swap is not None:
            for word, start, end in _word_spans(words):
                if word == swap.term:
                    memory[0, start:end] = swap.block
        logits = model.word_logits(memory, pad_mask)
    return F.log_softmax(logits[0], dim=-1)


def beam_generate(
    model: NextWordModel,
    chunk_vocab: Vocab,
    word_vocab: Vocab,
    query_words: list[str],
    n: int,
    beam: int,
    max_words: int = MAX_WORDS,
    swap: SwapSpec | None = None,
) -> list[tuple[list[str], float]]:
    """Top-n continuations of the query by word-level beam search."""
    if beam < 1 or n < 1:
        raise ValueError("n and beam must be >= 1")
    eoq_id = word_vocab.stoi.get(EOQ)
    # (words, logprob, done)
    beams: list[tuple[tuple[str, ...], float, bool]] = [((), 0.0, False)]
    for _ in range(max_words):
        if all(done for _, _, done in beams):
            break
        candidates = [b for b in beams if b[2]]
        for words, lp, done in beams:
            if done:
                continue
            log_probs = next_word_logprobs(
                model, chunk_vocab, list(query_words) + list(words), swap=swap
            )
            take = min(beam + 2, log_probs.shape[0])  # beam slots + PAD/UNK skips
            top = torch.topk(log_probs, take)
            for value, idx in zip(top.values.tolist(), top.indices.tolist()):
                if idx in (PAD, UNK):
                    continue
                if math.isinf(value):
                    continue
                if eoq_id is not None and idx == eoq_id:
                    candidates.append((words, lp + value, True))
                else:
                    candidates.append(
                        (words + (word_vocab.itos[idx],), lp + value, False)
                    )
        if not candidates:
            return []
        candidates.sort(key=lambda c: (-c[1], c[0]))
        beams = candidates[:beam]
    ranked = sorted(beams, key=lambda c: (-c[1], c[0]))
    return [(list(words), lp) for words, lp, _ in ranked[:n]]
