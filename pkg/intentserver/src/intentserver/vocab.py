"""Tokenization and vocabularies.

Words are split into fixed-size character chunks; continuation chunks carry
an "@@" prefix so word boundaries survive the mapping. The encoder consumes
chunk ids; the output side is a plain word vocabulary.
"""

from __future__ import annotations

import unicodedata

CHUNK_SIZE = 4
PAD, UNK = 0, 1
SPECIALS = ["<pad>", "<unk>"]

EOQ = "-eoq-"  # end-of-query marker used by the sample files


def _strip_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> list[str]:
    """Lowercase, whitespace-split, strip surrounding punctuation."""
    out = []
    for raw in text.lower().split():
        tok = _strip_punct(raw)
        if tok:
            out.append(tok)
    return out


def chunk_word(word: str, size: int = CHUNK_SIZE) -> list[str]:
    """Deterministic subword chunks: 'fishing' -> ['fish', '@@ing']."""
    if not word:
        return []
    pieces = [word[i : i + size] for i in range(0, len(word), size)]
    return [pieces[0]] + [f"@@{p}" for p in pieces[1:]]


def chunk_words(words: list[str]) -> list[str]:
    chunks = []
    for word in words:
        chunks.extend(chunk_word(word))
    return chunks


class Vocab:
    def __init__(self, tokens: list[str]):
        self.itos = SPECIALS + sorted(set(tokens) - set(SPECIALS))
        self.stoi = {tok: i for i, tok in enumerate(self.itos)}

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK)

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.id(t) for t in tokens]

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def to_list(self) -> list[str]:
        return list(self.itos)

    @classmethod
    def from_list(cls, itos: list[str]) -> "Vocab":
        vocab = cls([])
        vocab.itos = list(itos)
        vocab.stoi = {tok: i for i, tok in enumerate(itos)}
        return vocab
