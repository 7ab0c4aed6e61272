"""Shared tokenization policy and reserved tokens."""

import unicodedata

# Reserved end-of-query marker. The tokenizer strips surrounding punctuation,
# so no token produced from real text can keep the leading/trailing hyphens.
EOQ = "-eoq-"

# Queries are truncated to this many tokens; generation is capped at the same bound.
MAX_QUERY_TOKENS = 10


def _strip_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace runs, strip surrounding punctuation.

    No stemming: downstream intent filtering works on exact surface matches,
    so tokens must stay in surface form.
    """
    out = []
    for raw in text.lower().split():
        tok = _strip_punct(raw)
        if tok:
            out.append(tok)
    return out
