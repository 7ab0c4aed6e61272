"""Training-sample loading.

Two line formats are accepted, matching the query-log exporter:
  {"prefix": [tokens], "targets": [tokens]}   distributional (soft targets)
  {"prefix": [tokens], "next": token}          per-position next token
Every row carries a uniform distribution over its targets; plain next-token
rows are the singleton case.
"""

from __future__ import annotations

import json
from dataclasses import dataclass


class SampleError(ValueError):
    """Malformed training sample; message carries the line number."""


@dataclass
class Row:
    prefix: list[str]
    targets: list[str]  # uniform weight 1/len(targets)


def _parse_line(record: dict) -> tuple[str, Row]:
    prefix = record.get("prefix")
    if not isinstance(prefix, list) or not prefix or not all(
        isinstance(t, str) and t for t in prefix
    ):
        raise ValueError("bad prefix")
    if "targets" in record:
        targets = record["targets"]
        if not isinstance(targets, list) or not targets or not all(
            isinstance(t, str) and t for t in targets
        ):
            raise ValueError("bad targets")
        return "dclm", Row(prefix=list(prefix), targets=sorted(set(targets)))
    if "next" in record:
        nxt = record["next"]
        if not isinstance(nxt, str) or not nxt:
            raise ValueError("bad next token")
        return "clm", Row(prefix=list(prefix), targets=[nxt])
    raise ValueError("expected a 'targets' or 'next' field")


def load_rows(path: str, objective: str | None = None) -> list[Row]:
    """Load rows; if `objective` is given, every line must match it."""
    rows: list[Row] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                kind, row = _parse_line(record)
            except (json.JSONDecodeError, ValueError, TypeError) as exc:
                raise SampleError(f"{path}:{lineno}: {exc}") from exc
            if objective is not None and kind != objective:
                raise SampleError(
                    f"{path}:{lineno}: {kind} sample in a {objective} run"
                )
            rows.append(row)
    if not rows:
        raise SampleError(f"{path}: no samples")
    return rows
